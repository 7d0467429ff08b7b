#pragma once

#include <span>
#include <vector>

#include "tabkit/rng.hpp"
#include "tabkit/tensor.hpp"

namespace tabkit::ad {

// Elementwise arithmetic. Binary ops require identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor rsub_scalar(double c, const Tensor& x);  // c - x
Tensor exp_elem(const Tensor& x);
Tensor log_elem(const Tensor& x);

// Linear algebra on row-major matrices.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& x);
// out = x·w + b broadcast over rows; x [m×n], w [n×p], b [p].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
// Block-diagonal matmul: column block t of x multiplies row block t of w.
// x [m × g·k], w [g·k × p] -> [m × g·p].
Tensor grouped_matmul(const Tensor& x, const Tensor& w, std::size_t groups);

// Shape plumbing.
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t count);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
Tensor rowwise_sum(const Tensor& x);  // [m×n] -> [m×1]

// Broadcast helpers: v is a rank-1 vector over columns, c a per-row scalar
// ([m] or [m×1]).
Tensor add_rowvec(const Tensor& x, const Tensor& v);
Tensor sub_rowvec(const Tensor& x, const Tensor& v);
Tensor mul_rowvec(const Tensor& x, const Tensor& v);
Tensor mul_colvec(const Tensor& x, const Tensor& c);

// Activations. relu's subgradient at 0 is taken as 0.
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// glu([a | g]) = a ⊙ sigmoid(g); final dimension must be even.
Tensor glu(const Tensor& x);
Tensor softmax_rows(const Tensor& z);

// Euclidean projection of each row onto the probability simplex.
Tensor sparsemax_rows(const Tensor& z);
// 1.5-entmax per row: p_i = [max(0, (z_i - τ)/2)]² with τ bracketed by
// bisection on [max(z)-2, max(z)] until |Σp - 1| <= 1e-9.
Tensor entmax15_rows(const Tensor& z);
// Elementwise first component of entmax15([x, 0]); closed form.
Tensor entmoid15(const Tensor& x);

// Row gather from an embedding table [V×d]; backward scatter-adds.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices);

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
// Identity in inference mode or when p == 0 (consumes no randomness then).
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

// Per-column batch normalization. Training uses batch mean/population
// variance and updates running stats in place as (1-momentum)·old +
// momentum·batch; inference uses the running stats. Training needs >= 2 rows.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor& running_mean, Tensor& running_var, bool training,
                  double momentum = 0.1, double eps = 1e-5);

// Oblivious-tree leaf weights: gates [m × trees·depth] in [0,1] ->
// [m × trees·2^depth]. Bit j of the leaf index is 1 when the gate branch is
// taken at level j; every row of each tree's block lies on the simplex.
Tensor oblivious_leaf_weights(const Tensor& gates, std::size_t trees,
                              std::size_t depth);

// Losses (scalar outputs).
Tensor cross_entropy_logits(const Tensor& logits,
                            std::span<const std::size_t> targets);
Tensor mse(const Tensor& pred, const Tensor& target);

// Test hook for gradient checks: while a probe is installed, relu and the
// sparse activations record the smallest distance of any input to one of
// their nondifferentiable points (relu's 0, a projection's support
// boundary, entmoid's saturation at ±2). Finite-difference checks reject
// samples whose margin is below their step size.
struct KinkProbe {
  double min_margin = 1e300;
};
void set_kink_probe(KinkProbe* probe);  // nullptr disables

}  // namespace tabkit::ad
