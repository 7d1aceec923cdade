#pragma once

#include <vector>

#include "hmr/tape.hpp"

namespace hmr {

// Continuous-time diagonal SSM parameters for one channel: h' = A h + B x,
// y = C h, with per-entry diagonal A.
struct SsmParams {
    std::vector<double> A;  // diagonal entries, size N
    std::vector<double> B;  // size N
    std::vector<double> C;  // size N
    double delta = 0.0;     // timescale, > 0
};

struct DiscreteSsm {
    std::vector<double> A_bar;
    std::vector<double> B_bar;
};

// Zero-order hold: A_bar = exp(dA), B_bar = (dA)^{-1}(exp(dA) - 1) dB per
// entry, with the 2-term series below |dA| = 1e-6.
DiscreteSsm discretize_zoh(const SsmParams& p);

// h_t = A_bar h_{t-1} + B_bar x_t, y_t = C . h_t, h_0 = 0.
std::vector<double> scan_recurrent(const DiscreteSsm& d, const std::vector<double>& C,
                                   const std::vector<double>& x);

// K = (C B_bar, C A_bar B_bar, ..., C A_bar^{L-1} B_bar)
std::vector<double> build_conv_kernel(const DiscreteSsm& d, const std::vector<double>& C, int L);

// Causal convolution y[t] = sum_k kernel[k] x[t-k]; kernel length must equal
// sequence length.
std::vector<double> scan_convolutional(const std::vector<double>& kernel,
                                       const std::vector<double>& x);

// Input-dependent scan on the tape, fused forward/backward.
//   x  [L, D]   channel sequence
//   dt [L, D]   per-step timescales, already through the positivity link, > 0
//   A  [D, N]   per-channel diagonal state matrix
//   B  [L, N]   input projections per step
//   C  [L, N]   output projections per step
// Per channel d: h_t = exp(dt A_d) h_{t-1} + dt psi(dt A_d) B_t x_t[d],
// y_t[d] = C_t . h_t. State resets at each segment boundary. Returns [L, D].
Value selective_scan(Value x, Value dt, Value A, Value B, Value C,
                     const std::vector<int>& segments = {});

}  // namespace hmr
