#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "egocl/continual_engine.hpp"
#include "egocl/synth_gen.hpp"

namespace egocl {

/// Flat sectioned key=value experiment description. One dataset source
/// (synthetic config or per-task files), defaults mirroring the reference
/// experimental setup, and the strategy/evaluation plan.
struct ExperimentManifest {
    struct TaskFiles {
        std::filesystem::path edges;
        std::filesystem::path features;
        std::filesystem::path labels;
        std::filesystem::path embeddings;  // optional, empty if absent
        uint64_t split_seed = 0;
    };

    enum class DatasetMode { Synth, Files };

    DatasetMode mode = DatasetMode::Synth;
    SynthConfig synth;
    std::vector<TaskFiles> task_files;

    DeepWalkConfig deepwalk;
    SamplerConfig sampler;
    nn::ModelConfig model;
    nn::TrainConfig train;

    /// One continual strategy to run; ego strategies may carry a "-bfs" or
    /// "-rwr" suffix overriding the sampler section's extraction strategy.
    struct StrategySpec {
        std::string name;  // as written in the manifest
        StrategyConfig config;
        std::optional<SampleStrategy> sampler_override;
    };
    std::vector<StrategySpec> strategies;
    std::vector<std::string> static_methods{"gat", "ego-bfs", "ego-rwr"};

    int runs = 5;
    uint64_t eval_seed = 1;
    std::filesystem::path out_dir = "results";

    static ExperimentManifest load(const std::filesystem::path& path);
    static ExperimentManifest parse(const std::string& text,
                                    const std::filesystem::path& base_dir,
                                    const std::string& file_label);

    /// Loads (or generates) the task stream behind this manifest.
    TaskStream open_dataset() const;
};

}  // namespace egocl
