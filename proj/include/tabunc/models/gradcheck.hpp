#pragma once

#include <vector>

#include "tabunc/core/gradcheck.hpp"
#include "tabunc/models/model.hpp"

namespace tabunc {

// Finite-difference check of a whole model's training-mode forward pass
// (loss = sum(output * probe)). Every loss evaluation replays the same
// random stream, so stochastic parts (candidate sampling, dropout masks)
// are frozen across probes.
inline GradCheckReport check_model(Model& model, const Matrix& x, const std::vector<std::size_t>& rows, Rng rng,
                                   const GradCheckOptions& options = {}) {
    const Rng stream = rng.split("stream");
    auto run = [&](Tape& tape) {
        Rng r = stream;
        Rng dropout = stream.split("dropout");
        return model.forward_train(x, rows, ForwardContext{Phase::train, &dropout}, r, tape);
    };
    Tape tape;
    const Matrix out = run(tape);
    Matrix probe(out.rows(), out.cols());
    Rng probe_rng = rng.split("probe");
    for (double& v : probe.data()) v = probe_rng.normal();
    auto grads = zero_grads(model);
    model.backward(tape, probe, grads);
    auto loss = [&] {
        Tape t;
        const Matrix o = run(t);
        double s = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * probe[i];
        return s;
    };
    return check_gradients(model.parameters(), grads, loss, rng.split("coords"), options);
}

} // namespace tabunc
