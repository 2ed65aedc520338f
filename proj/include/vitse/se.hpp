#pragma once

#include "vitse/tensor.hpp"

namespace vitse {

// Excitation gate on the classification token: bottleneck FC, ReLU, expand
// FC, Sigmoid, then a single pointwise multiply with the input. Only the
// excitation half of the original squeeze-and-excitation design is used; the
// squeeze (pooling) half has nothing to pool on a single token vector.
template <typename T>
struct SEWeights {
    TensorPtr<T> w_reduce;  // embed_dim x bottleneck
    TensorPtr<T> b_reduce;  // bottleneck
    TensorPtr<T> w_expand;  // bottleneck x embed_dim
    TensorPtr<T> b_expand;  // embed_dim
};

// Sigmoid(expand(ReLU(reduce(cls)))). Every gate entry lies strictly in (0, 1).
template <typename T>
TensorPtr<T> excitation(Tape<T>& tape, const TensorPtr<T>& cls, const SEWeights<T>& w) {
    const int64_t dim = cls->numel();
    if (w.w_reduce->rows() != dim)
        throw ShapeError("excitation: cls length " + std::to_string(dim) + " does not match reduce weights " +
                         shape_str(w.w_reduce->shape));
    auto x = tape.reshape(cls, {1, dim});
    auto hidden = tape.relu(tape.add_bias(tape.matmul(x, w.w_reduce), w.b_reduce));
    auto gate = tape.sigmoid(tape.add_bias(tape.matmul(hidden, w.w_expand), w.b_expand));
    return tape.reshape(gate, {dim});
}

// cls (.) excitation(cls); the gate is bounded by 1, so no output entry can
// exceed the matching input entry in magnitude.
template <typename T>
TensorPtr<T> se_gate(Tape<T>& tape, const TensorPtr<T>& cls, const SEWeights<T>& w) {
    return tape.mul(cls, excitation(tape, cls, w));
}

// Classifier head over the cls feature vector. With se_enabled the features
// pass through the gate first; without it the head sees them untouched,
// which is the ablation axis.
template <typename T>
TensorPtr<T> classify(Tape<T>& tape, const TensorPtr<T>& features, const SEWeights<T>* se, bool se_enabled,
                      const TensorPtr<T>& w_head, const TensorPtr<T>& b_head) {
    TensorPtr<T> f = features;
    if (se_enabled) {
        if (!se) throw ContractError("classify: se_enabled without SE weights");
        f = se_gate(tape, f, *se);
    }
    const int64_t dim = f->numel();
    if (w_head->rows() != dim)
        throw ShapeError("classify: feature length " + std::to_string(dim) + " does not match head " +
                         shape_str(w_head->shape));
    auto logits = tape.add_bias(tape.matmul(tape.reshape(f, {1, dim}), w_head), b_head);
    return tape.reshape(logits, {w_head->cols()});
}

}  // namespace vitse
