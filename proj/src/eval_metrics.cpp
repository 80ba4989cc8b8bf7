#include "egocl/eval_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace egocl {

double auc(std::span<const double> scores, std::span<const uint8_t> labels) {
    if (scores.size() != labels.size())
        throw MetricError("auc: scores and labels differ in length");
    int64_t n_pos = 0;
    for (uint8_t l : labels) n_pos += (l != 0);
    const auto n = static_cast<int64_t>(scores.size());
    const int64_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw MetricError("auc undefined: only one class present (" +
                          std::to_string(n_pos) + " positive of " + std::to_string(n) + ")");

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int64_t a, int64_t b) {
        return scores[static_cast<size_t>(a)] < scores[static_cast<size_t>(b)];
    });

    // Average ranks over tie groups; sum ranks of positives.
    double rank_sum_pos = 0.0;
    size_t i = 0;
    while (i < order.size()) {
        size_t j = i;
        while (j + 1 < order.size() &&
               scores[static_cast<size_t>(order[j + 1])] ==
                   scores[static_cast<size_t>(order[i])])
            ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k)
            if (labels[static_cast<size_t>(order[k])] != 0) rank_sum_pos += avg_rank;
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

AucMatrix::AucMatrix(int num_tasks) : n_(num_tasks) {
    if (n_ < 1) throw MetricError("AucMatrix needs at least one task");
    auto slots = static_cast<size_t>(n_) * (static_cast<size_t>(n_) + 1) / 2;
    values_.assign(slots, 0.0);
    filled_.assign(slots, 0);
}

int64_t AucMatrix::slot(int i, int j) const {
    if (i < 1 || i > n_ || j < 1 || j > i)
        throw MetricError("AucMatrix index (" + std::to_string(i) + "," + std::to_string(j) +
                          ") outside lower triangle of N=" + std::to_string(n_));
    return static_cast<int64_t>(i - 1) * i / 2 + (j - 1);
}

void AucMatrix::set(int i, int j, double value) {
    auto s = static_cast<size_t>(slot(i, j));
    values_[s] = value;
    filled_[s] = 1;
}

double AucMatrix::at(int i, int j) const {
    auto s = static_cast<size_t>(slot(i, j));
    if (!filled_[s])
        throw MetricError("AucMatrix entry (" + std::to_string(i) + "," + std::to_string(j) +
                          ") not filled");
    return values_[s];
}

bool AucMatrix::complete() const {
    return std::all_of(filled_.begin(), filled_.end(), [](uint8_t f) { return f != 0; });
}

std::string AucMatrix::to_csv() const {
    std::string out = "stage";
    for (int j = 1; j <= n_; ++j) out += ",task" + std::to_string(j);
    out += '\n';
    char buf[32];
    for (int i = 1; i <= n_; ++i) {
        out += std::to_string(i);
        for (int j = 1; j <= n_; ++j) {
            out += ',';
            auto s = static_cast<size_t>(static_cast<int64_t>(i - 1) * i / 2 + (j - 1));
            if (j <= i && filled_[s]) {
                std::snprintf(buf, sizeof(buf), "%.6f", values_[s]);
                out += buf;
            }
        }
        out += '\n';
    }
    return out;
}

double avg_auc(const AucMatrix& m) {
    const int n = m.num_tasks();
    double sum = 0.0;
    for (int j = 1; j <= n; ++j) sum += m.at(n, j);
    return sum / static_cast<double>(n);
}

double fgt(const AucMatrix& m) {
    const int n = m.num_tasks();
    if (n < 2) throw MetricError("fgt undefined for a single task");
    double sum = 0.0;
    for (int i = 1; i <= n - 1; ++i) sum += m.at(i, i) - m.at(n, i);
    return sum / static_cast<double>(n - 1);
}

void ResourceReport::add_seconds(const std::string& label, double seconds) {
    seconds_[label] += seconds;
}

void ResourceReport::add_bytes(const std::string& label, int64_t bytes) {
    bytes_[label] += bytes;
}

double ResourceReport::seconds(const std::string& label) const {
    auto it = seconds_.find(label);
    return it == seconds_.end() ? 0.0 : it->second;
}

int64_t ResourceReport::bytes(const std::string& label) const {
    auto it = bytes_.find(label);
    return it == bytes_.end() ? 0 : it->second;
}

void ResourceReport::merge(const ResourceReport& other) {
    for (const auto& [k, v] : other.seconds_) seconds_[k] += v;
    for (const auto& [k, v] : other.bytes_) bytes_[k] += v;
}

}  // namespace egocl
