#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsc/tensor.hpp"

namespace tsc {

/// Labeled train/test series of one dataset. Labels are remapped to
/// 0..classes-1 by ascending original value; original_labels inverts the map.
struct DatasetSplit {
    std::string name;
    std::size_t length = 0;   // T, shared by every series
    std::size_t classes = 0;  // C
    Tensor train;             // [N_train, T]
    Tensor test;              // [N_test, T]
    std::vector<int> train_labels;
    std::vector<int> test_labels;
    std::vector<double> original_labels;  // class index -> original label value
    bool normalized = false;
    double train_mean = 0.0;  // set by znormalize
    double train_std = 1.0;
};

/// Reads `<name>_TRAIN` / `<name>_TEST` from a directory. One series per
/// line, label first; comma-separated, falling back to whitespace.
DatasetSplit load_ucr(const std::string& directory, const std::string& name);

/// Writes the split back in the same text format (17 significant digits).
void save_ucr(const DatasetSplit& split, const std::string& directory);

/// Scalar z-normalization of both splits with the mean and standard
/// deviation of the whole training matrix. Degenerate (zero-spread)
/// training data is an error.
DatasetSplit znormalize(DatasetSplit split);

/// labels -> one-hot [N, classes].
Tensor one_hot(const std::vector<int>& labels, std::size_t classes);

enum class SyntheticKind {
    cbf_like,        // cylinder / bell / funnel shapes, 3 classes
    sine_vs_square,  // 2 classes
};

/// Deterministic synthetic corpus: per_class series in each split, length T,
/// Gaussian noise sigma. Classes stay separable for sigma <= 0.1.
DatasetSplit make_synthetic(SyntheticKind kind, std::size_t per_class, std::size_t length,
                            double noise_sigma, std::uint64_t seed);

}  // namespace tsc
