#pragma once

#include <filesystem>

#include "egocl/task_stream.hpp"

namespace egocl {

/// Synthetic drift stream: per task, a stochastic block model graph whose
/// labels follow a linear rule over (block polarity, node propensity) latents
/// mixed with the neighborhood average. Drift resamples a fraction of the
/// block polarities and re-draws community membership for a fraction of
/// nodes between consecutive tasks.
struct SynthConfig {
    int num_tasks = 5;
    int nodes_per_task = 2000;
    int blocks = 10;
    double p_in = 0.012;
    double p_out = 1.0 / 3000.0;
    double struct_weight = 1.0;   // weight of the block-polarity latent
    double prop_weight = 1.0;     // weight of the per-node propensity latent
    double homophily_mix = 0.5;   // neighborhood mixing of the latents
    double drift = 0.6;           // fraction of the label rule resampled per task
    double label_noise = 0.05;
    double target_pos_rate = 0.30;
    int raw_columns = 4;
    uint64_t seed = 1;

    void validate() const;
    double expected_degree() const;
};

TaskStream generate_task_stream(const SynthConfig& cfg);

/// Writes each task in the graph_store file formats plus a ready-to-run
/// manifest stub pointing at them.
void write_stream(const TaskStream& stream, const std::filesystem::path& dir);

std::vector<GraphStats> summarize(const TaskStream& stream);

}  // namespace egocl
