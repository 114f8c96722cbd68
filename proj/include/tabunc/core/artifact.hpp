#pragma once

#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabunc/core/io.hpp"
#include "tabunc/core/rng.hpp"

namespace tabunc {

// Identifies the run that produced an artifact.
struct Provenance {
    std::string config_hash = "none";
    std::uint64_t seed = 0;
};

// 64-bit FNV-1a of the canonical (sorted-key, compact) JSON dump, as hex.
inline std::string config_hash(const nlohmann::json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(detail::fnv1a(config.dump())));
    return buf;
}

// Round-trippable and platform-independent number formatting.
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Collects rows and writes them in one go behind a provenance comment.
class CsvWriter {
public:
    CsvWriter(const Provenance& prov, std::vector<std::string> columns) : columns_(columns.size()) {
        out_ << "# config_hash=" << prov.config_hash << " seed=" << prov.seed << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        if (cells.size() != columns_) {
            throw DimensionError("csv row has " + std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(columns_));
        }
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << "\n";
    }

    std::string str() const { return out_.str(); }
    void save(const std::filesystem::path& path) const { io::write_text(path, out_.str()); }

private:
    std::size_t columns_;
    std::ostringstream out_;
};

} // namespace tabunc
