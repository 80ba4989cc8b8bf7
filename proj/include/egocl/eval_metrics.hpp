#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "egocl/common.hpp"

namespace egocl {

/// Mann-Whitney AUC with average ranks for ties. Throws MetricError when only
/// one class is present.
double auc(std::span<const double> scores, std::span<const uint8_t> labels);

/// Lower-triangular matrix of test scores: entry (i, j) is the AUC on task j
/// after training through task i (1-based, j <= i).
class AucMatrix {
public:
    explicit AucMatrix(int num_tasks);

    int num_tasks() const { return n_; }
    void set(int i, int j, double value);
    double at(int i, int j) const;
    bool complete() const;

    std::string to_csv() const;

private:
    int64_t slot(int i, int j) const;

    int n_;
    std::vector<double> values_;
    std::vector<uint8_t> filled_;
};

/// Mean of the final row: (1/N) * sum_i AUC_{N,i}.
double avg_auc(const AucMatrix& m);

/// Average forgetting: (1/(N-1)) * sum_{i<N} (AUC_{i,i} - AUC_{N,i}).
/// Undefined (MetricError) for a single task.
double fgt(const AucMatrix& m);

/// Wall-clock accounting per labelled section; same-label sections add up.
class ResourceReport {
public:
    void add_seconds(const std::string& label, double seconds);
    void add_bytes(const std::string& label, int64_t bytes);
    double seconds(const std::string& label) const;
    int64_t bytes(const std::string& label) const;
    const std::map<std::string, double>& all_seconds() const { return seconds_; }
    const std::map<std::string, int64_t>& all_bytes() const { return bytes_; }
    void merge(const ResourceReport& other);

private:
    std::map<std::string, double> seconds_;
    std::map<std::string, int64_t> bytes_;
};

template <class F>
auto time_section(const std::string& label, ResourceReport& report, F&& fn) {
    auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        report.add_seconds(label, std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count());
    } else {
        auto result = fn();
        report.add_seconds(label, std::chrono::duration<double>(
                                      std::chrono::steady_clock::now() - t0)
                                      .count());
        return result;
    }
}

}  // namespace egocl
