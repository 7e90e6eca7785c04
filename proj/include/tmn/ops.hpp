#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tmn/tape.hpp"

/// Differentiable primitives. Batched data is laid out one sample per row.
namespace tmn::ops {

/// x·Wᵀ + b for every row of x; W is out×in, b is 1×out.
Var affine(Tape& tape, Var w, Var b, Var x);
Var relu(Tape& tape, Var x);
Var matmul(Tape& tape, Var a, Var b);
Var transpose(Tape& tape, Var x);

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
/// Elementwise product.
Var mul(Tape& tape, Var a, Var b);
/// Adds a 1×n row to every row of x.
Var add_row(Tape& tape, Var x, Var row);
/// s·x with s a 1×1 tensor.
Var scale(Tape& tape, Var s, Var x);
Var sum(Tape& tape, Var x);
Var mean(Tape& tape, Var x);

Var concat_cols(Tape& tape, std::span<const Var> parts);
/// Columns [begin, begin + count) of x.
Var slice_cols(Tape& tape, Var x, std::size_t begin, std::size_t count);
Var gather_rows(Tape& tape, Var table, std::vector<std::size_t> rows);
/// Reads `rows*cols` consecutive entries of row `row`, starting at `offset`,
/// as a row-major rows×cols matrix.
Var slice_reshape(Tape& tape, Var src, std::size_t row, std::size_t offset, std::size_t rows,
                  std::size_t cols);

/// Softmax down each column; every column of the result is positive and sums to 1.
Var column_softmax(Tape& tape, Var logits);
/// Per-row log Σ exp over entries whose mask byte is non-zero (all entries if
/// the mask is empty). Returns rows×1.
Var log_sum_exp_rows(Tape& tape, Var scores, std::vector<unsigned char> mask = {});
/// Picks scores(r, columns[r]) for every row. Returns rows×1.
Var pick(Tape& tape, Var scores, std::vector<std::size_t> columns);
/// Mean over rows of −log softmax(scores)[target], restricted to the mask.
Var softmax_cross_entropy(Tape& tape, Var scores, std::vector<std::size_t> targets,
                          std::vector<unsigned char> mask = {});

/// Gated mixing between module layers. `outputs` is rows×(M_in·d) with module k
/// in column block k, `gates` is M_in×M_out. Block j of the result is
/// Σ_k gates(k, j)·block_k.
Var module_mix(Tape& tape, Var outputs, Var gates);
/// Independent affine map per module. x is rows×(M·d_in), w stacks the M
/// d_out×d_in module weights vertically, b is 1×(M·d_out).
Var block_affine(Tape& tape, Var w, Var b, Var x, std::size_t modules);

}  // namespace tmn::ops
