#include "tsc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace tsc {

namespace {

struct RawSplit {
    std::vector<double> labels;
    std::vector<std::vector<double>> rows;
};

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    if (line.find(',') != std::string::npos) {
        std::istringstream ss(line);
        while (std::getline(ss, field, ','))
            if (!field.empty()) fields.push_back(field);
    } else {
        std::istringstream ss(line);
        while (ss >> field) fields.push_back(field);
    }
    return fields;
}

double parse_value(const std::string& s, const std::string& file, std::size_t line_no) {
    std::size_t pos = 0;
    double v = 0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw DataError(file + ":" + std::to_string(line_no) + ": non-numeric field '" + s + "'");
    }
    if (pos != s.size())
        throw DataError(file + ":" + std::to_string(line_no) + ": non-numeric field '" + s + "'");
    return v;
}

RawSplit read_ucr_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("missing dataset file: " + path);
    RawSplit raw;
    std::string line;
    std::size_t line_no = 0;
    std::size_t expected_len = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_fields(line);
        if (fields.size() < 2)
            throw DataError(path + ":" + std::to_string(line_no) + ": series needs a label and values");
        std::vector<double> row;
        row.reserve(fields.size() - 1);
        raw.labels.push_back(parse_value(fields[0], path, line_no));
        for (std::size_t i = 1; i < fields.size(); ++i)
            row.push_back(parse_value(fields[i], path, line_no));
        if (expected_len == 0)
            expected_len = row.size();
        else if (row.size() != expected_len)
            throw DataError(path + ":" + std::to_string(line_no) + ": ragged series length " +
                            std::to_string(row.size()) + " vs " + std::to_string(expected_len));
        raw.rows.push_back(std::move(row));
    }
    if (raw.rows.empty()) throw DataError("empty dataset file: " + path);
    return raw;
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size(), t = rows[0].size();
    Tensor out({n, t});
    for (std::size_t i = 0; i < n; ++i)
        std::copy(rows[i].begin(), rows[i].end(), out.data() + i * t);
    return out;
}

}  // namespace

DatasetSplit load_ucr(const std::string& directory, const std::string& name) {
    const std::string base = directory.empty() ? name : directory + "/" + name;
    RawSplit train = read_ucr_file(base + "_TRAIN");
    RawSplit test = read_ucr_file(base + "_TEST");
    if (train.rows[0].size() != test.rows[0].size())
        throw DataError(name + ": train and test series lengths differ");

    std::map<double, int> label_map;
    for (double l : train.labels) label_map.emplace(l, 0);
    if (label_map.size() < 2)
        throw DataError(name + ": training split has a single class");
    int next = 0;
    for (auto& [orig, idx] : label_map) idx = next++;
    for (double l : test.labels)
        if (!label_map.count(l))
            throw DataError(name + ": test label " + format_g17(l) + " absent from training split");

    DatasetSplit split;
    split.name = name;
    split.length = train.rows[0].size();
    split.classes = label_map.size();
    split.train = rows_to_tensor(train.rows);
    split.test = rows_to_tensor(test.rows);
    split.original_labels.resize(label_map.size());
    for (const auto& [orig, idx] : label_map)
        split.original_labels[static_cast<std::size_t>(idx)] = orig;
    for (double l : train.labels) split.train_labels.push_back(label_map.at(l));
    for (double l : test.labels) split.test_labels.push_back(label_map.at(l));
    return split;
}

void save_ucr(const DatasetSplit& split, const std::string& directory) {
    auto write = [&](const Tensor& m, const std::vector<int>& labels, const std::string& path) {
        std::ofstream out(path);
        if (!out) throw DataError("cannot write dataset file: " + path);
        const std::size_t t = split.length;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double orig = split.original_labels.empty()
                ? labels[i]
                : split.original_labels[static_cast<std::size_t>(labels[i])];
            out << format_g17(orig);
            for (std::size_t j = 0; j < t; ++j) out << ',' << format_g17(m[i * t + j]);
            out << '\n';
        }
        if (!out) throw DataError("failed writing dataset file: " + path);
    };
    const std::string base = directory.empty() ? split.name : directory + "/" + split.name;
    write(split.train, split.train_labels, base + "_TRAIN");
    write(split.test, split.test_labels, base + "_TEST");
}

DatasetSplit znormalize(DatasetSplit split) {
    const std::size_t n = split.train.size();
    if (n == 0) throw DataError("znormalize: empty training split");
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += split.train[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = split.train[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(n);
    const double std_dev = std::sqrt(var);
    if (std_dev == 0.0)
        throw NumericError("znormalize: training split has zero standard deviation");

    for (std::size_t i = 0; i < split.train.size(); ++i)
        split.train[i] = (split.train[i] - mean) / std_dev;
    for (std::size_t i = 0; i < split.test.size(); ++i)
        split.test[i] = (split.test[i] - mean) / std_dev;
    split.normalized = true;
    split.train_mean = mean;
    split.train_std = std_dev;
    return split;
}

Tensor one_hot(const std::vector<int>& labels, std::size_t classes) {
    Tensor out({labels.size(), classes});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int l = labels[i];
        if (l < 0 || static_cast<std::size_t>(l) >= classes)
            throw DataError("one_hot: label " + std::to_string(l) + " out of range");
        out.at(i, static_cast<std::size_t>(l)) = 1.0;
    }
    return out;
}

namespace {

// Classic cylinder/bell/funnel shapes on a random [a,b] window, amplitude
// jittered, plus Gaussian noise.
std::vector<double> cbf_series(int cls, std::size_t t, double sigma, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto td = static_cast<double>(t);
    const double a = td * (0.15 + 0.10 * unif(rng));
    const double b = a + td * (0.35 + 0.25 * unif(rng));
    const double amp = 1.0 + 0.1 * gauss(rng);
    std::vector<double> x(t);
    for (std::size_t i = 0; i < t; ++i) {
        const double u = static_cast<double>(i);
        double shape = 0.0;
        if (u >= a && u <= b) {
            if (cls == 0)
                shape = 1.0;                      // cylinder: plateau
            else if (cls == 1)
                shape = (u - a) / (b - a);        // bell: ramp up, sharp drop
            else
                shape = (b - u) / (b - a);        // funnel: sharp rise, ramp down
        }
        x[i] = amp * shape + sigma * gauss(rng);
    }
    return x;
}

std::vector<double> wave_series(int cls, std::size_t t, double sigma, Rng& rng) {
    constexpr double pi = std::numbers::pi;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * pi);
    const double ph = phase(rng);
    const double cycles = 2.0;
    std::vector<double> x(t);
    for (std::size_t i = 0; i < t; ++i) {
        const double arg = 2.0 * pi * cycles * static_cast<double>(i) / static_cast<double>(t) + ph;
        const double s = std::sin(arg);
        const double clean = cls == 0 ? s : (s >= 0.0 ? 1.0 : -1.0);
        x[i] = clean + sigma * gauss(rng);
    }
    return x;
}

}  // namespace

DatasetSplit make_synthetic(SyntheticKind kind, std::size_t per_class, std::size_t length,
                            double noise_sigma, std::uint64_t seed) {
    if (per_class == 0) throw DataError("make_synthetic: per_class must be positive");
    if (length < 8) throw DataError("make_synthetic: series length too short");
    const int classes = kind == SyntheticKind::cbf_like ? 3 : 2;

    Rng rng(seed);
    DatasetSplit split;
    split.name = kind == SyntheticKind::cbf_like ? "cbf-like" : "sine-vs-square";
    split.length = length;
    split.classes = static_cast<std::size_t>(classes);
    for (int c = 0; c < classes; ++c) split.original_labels.push_back(c);

    std::vector<std::vector<double>> train_rows, test_rows;
    for (int part = 0; part < 2; ++part) {
        auto& rows = part == 0 ? train_rows : test_rows;
        auto& labels = part == 0 ? split.train_labels : split.test_labels;
        for (int c = 0; c < classes; ++c)
            for (std::size_t i = 0; i < per_class; ++i) {
                rows.push_back(kind == SyntheticKind::cbf_like
                                   ? cbf_series(c, length, noise_sigma, rng)
                                   : wave_series(c, length, noise_sigma, rng));
                labels.push_back(c);
            }
    }
    split.train = rows_to_tensor(train_rows);
    split.test = rows_to_tensor(test_rows);
    return split;
}

}  // namespace tsc
