#include "egocl/manifest.hpp"

#include <algorithm>
#include <set>

#include "egocl/io.hpp"

namespace egocl {

namespace {

struct Section {
    std::map<std::string, std::string> kv;
    std::set<std::string> consumed;

    bool has(const std::string& key) const { return kv.count(key) != 0; }

    std::string take(const std::string& key, const std::string& fallback) {
        consumed.insert(key);
        auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    }

    double take_double(const std::string& key, double fallback) {
        consumed.insert(key);
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        double v = 0;
        if (!parse_double(it->second, v))
            throw ConfigError("manifest: key '" + key + "' is not a number: " + it->second);
        return v;
    }

    int64_t take_int(const std::string& key, int64_t fallback) {
        consumed.insert(key);
        auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        int64_t v = 0;
        if (!parse_int64(it->second, v))
            throw ConfigError("manifest: key '" + key + "' is not an integer: " + it->second);
        return v;
    }

    void reject_unconsumed(const std::string& section_name) const {
        for (const auto& [k, v] : kv)
            if (!consumed.count(k))
                throw ConfigError("manifest: unknown key '" + k + "' in section [" +
                                  section_name + "]");
    }
};

std::map<std::string, Section> parse_sections(const std::string& text,
                                              const std::string& label) {
    std::map<std::string, Section> sections;
    std::string current;
    long line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string_view line(text.data() + pos,
                              (nl == std::string::npos ? text.size() : nl) - pos);
        pos = (nl == std::string::npos) ? text.size() + 1 : nl + 1;
        ++line_no;
        line = trim_view(line);
        if (line.empty() || line[0] == '#') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(label, line_no, "malformed section header");
            current = std::string(trim_view(line.substr(1, line.size() - 2)));
            if (current.empty()) throw ParseError(label, line_no, "empty section name");
            sections[current];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(label, line_no, "expected 'key = value'");
        if (current.empty())
            throw ParseError(label, line_no, "key outside of any [section]");
        std::string key(trim_view(line.substr(0, eq)));
        std::string value(trim_view(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(label, line_no, "empty key");
        if (!sections[current].kv.emplace(key, value).second)
            throw ParseError(label, line_no, "duplicate key '" + key + "'");
    }
    return sections;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    for (auto part : split_view(value, ',')) {
        auto t = trim_view(part);
        if (!t.empty()) out.emplace_back(t);
    }
    return out;
}

}  // namespace

ExperimentManifest ExperimentManifest::load(const std::filesystem::path& path) {
    return parse(read_text_file(path), path.parent_path(), path.string());
}

ExperimentManifest ExperimentManifest::parse(const std::string& text,
                                             const std::filesystem::path& base_dir,
                                             const std::string& label) {
    auto sections = parse_sections(text, label);
    ExperimentManifest m;

    auto section_or_empty = [&](const std::string& name) -> Section& {
        return sections[name];  // creates empty section for pure defaults
    };

    {
        Section& s = section_or_empty("dataset");
        const std::string mode = s.take("mode", "synth");
        if (mode == "synth") {
            m.mode = DatasetMode::Synth;
            m.synth.num_tasks = static_cast<int>(s.take_int("num_tasks", m.synth.num_tasks));
            m.synth.nodes_per_task =
                static_cast<int>(s.take_int("nodes_per_task", m.synth.nodes_per_task));
            m.synth.blocks = static_cast<int>(s.take_int("blocks", m.synth.blocks));
            m.synth.p_in = s.take_double("p_in", m.synth.p_in);
            m.synth.p_out = s.take_double("p_out", m.synth.p_out);
            m.synth.struct_weight = s.take_double("struct_weight", m.synth.struct_weight);
            m.synth.prop_weight = s.take_double("prop_weight", m.synth.prop_weight);
            m.synth.homophily_mix = s.take_double("homophily_mix", m.synth.homophily_mix);
            m.synth.drift = s.take_double("drift", m.synth.drift);
            m.synth.label_noise = s.take_double("label_noise", m.synth.label_noise);
            m.synth.target_pos_rate =
                s.take_double("target_pos_rate", m.synth.target_pos_rate);
            m.synth.raw_columns =
                static_cast<int>(s.take_int("raw_columns", m.synth.raw_columns));
            m.synth.seed = static_cast<uint64_t>(s.take_int("seed", 1));
            m.synth.validate();
        } else if (mode == "files") {
            m.mode = DatasetMode::Files;
            const auto tasks = s.take_int("tasks", 0);
            if (tasks < 1)
                throw ConfigError("manifest: files mode needs 'tasks = <count>'");
            const auto default_seed = static_cast<uint64_t>(s.take_int("seed", 1));
            for (int64_t t = 1; t <= tasks; ++t) {
                const std::string base = "task" + std::to_string(t);
                TaskFiles tf;
                const std::string edges = s.take(base + ".edges", "");
                const std::string feats = s.take(base + ".features", "");
                const std::string labels = s.take(base + ".labels", "");
                if (edges.empty() || feats.empty() || labels.empty())
                    throw ConfigError("manifest: missing file keys for " + base);
                tf.edges = base_dir / edges;
                tf.features = base_dir / feats;
                tf.labels = base_dir / labels;
                const std::string emb = s.take(base + ".embeddings", "");
                if (!emb.empty()) tf.embeddings = base_dir / emb;
                tf.split_seed = static_cast<uint64_t>(
                    s.take_int(base + ".seed", static_cast<int64_t>(default_seed)));
                m.task_files.push_back(std::move(tf));
            }
        } else {
            throw ConfigError("manifest: dataset mode must be 'synth' or 'files'");
        }
        s.reject_unconsumed("dataset");
    }

    {
        Section& s = section_or_empty("features");
        m.deepwalk.dims = static_cast<int>(s.take_int("dims", m.deepwalk.dims));
        m.deepwalk.walks_per_node =
            static_cast<int>(s.take_int("walks_per_node", m.deepwalk.walks_per_node));
        m.deepwalk.walk_length =
            static_cast<int>(s.take_int("walk_length", m.deepwalk.walk_length));
        m.deepwalk.window = static_cast<int>(s.take_int("window", m.deepwalk.window));
        m.deepwalk.negatives = static_cast<int>(s.take_int("negatives", m.deepwalk.negatives));
        m.deepwalk.epochs = static_cast<int>(s.take_int("epochs", m.deepwalk.epochs));
        m.deepwalk.learning_rate = s.take_double("learning_rate", m.deepwalk.learning_rate);
        m.deepwalk.seed = static_cast<uint64_t>(s.take_int("seed", 1));
        m.deepwalk.validate();
        s.reject_unconsumed("features");
    }

    {
        Section& s = section_or_empty("sampler");
        const std::string strat = s.take("strategy", "bfs");
        if (strat == "bfs") m.sampler.strategy = SampleStrategy::Bfs;
        else if (strat == "rwr") m.sampler.strategy = SampleStrategy::Rwr;
        else throw ConfigError("manifest: sampler strategy must be 'bfs' or 'rwr'");
        m.sampler.ego_size = static_cast<int>(s.take_int("ego_size", m.sampler.ego_size));
        m.sampler.restart_prob = s.take_double("restart_prob", m.sampler.restart_prob);
        m.sampler.step_cap = static_cast<int>(s.take_int("step_cap", m.sampler.step_cap));
        m.sampler.seed = static_cast<uint64_t>(s.take_int("seed", 0));
        m.sampler.validate();
        s.reject_unconsumed("sampler");
    }

    {
        Section& s = section_or_empty("model");
        const std::string arch = s.take("arch", "gat");
        if (arch == "gat") m.model.arch = nn::Arch::Gat;
        else if (arch == "gcn") m.model.arch = nn::Arch::Gcn;
        else throw ConfigError("manifest: model arch must be 'gat' or 'gcn'");
        m.model.hidden_total = static_cast<int>(s.take_int("hidden", m.model.hidden_total));
        m.model.heads = static_cast<int>(s.take_int("heads", m.model.heads));
        m.model.layers = static_cast<int>(s.take_int("layers", m.model.layers));
        m.model.leaky_slope = s.take_double("leaky_slope", m.model.leaky_slope);
        s.reject_unconsumed("model");
    }

    {
        Section& s = section_or_empty("train");
        m.train.learning_rate = s.take_double("learning_rate", m.train.learning_rate);
        m.train.weight_decay = s.take_double("weight_decay", m.train.weight_decay);
        m.train.epochs = static_cast<int>(s.take_int("epochs", m.train.epochs));
        m.train.batch_size = static_cast<int>(s.take_int("batch_size", m.train.batch_size));
        m.train.validate();
        s.reject_unconsumed("train");
    }

    {
        Section& s = section_or_empty("strategy");
        const std::string names = s.take("name", "egocl");
        const bool has_rate = s.has("replay_rate");
        const bool has_lambda = s.has("ewc_lambda");
        const double rate = s.take_double("replay_rate", 0.1);
        const double lambda = s.take_double("ewc_lambda", 10.0);
        for (const std::string& name : split_list(names)) {
            std::string stem = name;
            std::optional<SampleStrategy> override;
            if (stem.size() > 4 && stem.ends_with("-bfs")) {
                override = SampleStrategy::Bfs;
                stem.resize(stem.size() - 4);
            } else if (stem.size() > 4 && stem.ends_with("-rwr")) {
                override = SampleStrategy::Rwr;
                stem.resize(stem.size() - 4);
            }
            auto kind = strategy_from_name(stem);
            if (!kind) throw ConfigError("manifest: unknown strategy '" + name + "'");
            if (override && !strategy_uses_egos(*kind))
                throw ConfigError("manifest: strategy '" + name +
                                  "' does not take a sampler suffix");
            StrategyConfig sc;
            sc.kind = *kind;
            const bool replay_based = sc.kind == StrategyKind::EgoCl ||
                                      sc.kind == StrategyKind::NodeReplay ||
                                      sc.kind == StrategyKind::ErMf;
            if (has_rate && replay_based) sc.replay_rate = rate;
            if (has_lambda && sc.kind == StrategyKind::Ewc) sc.ewc_lambda = lambda;
            sc.validate();
            m.strategies.push_back({name, sc, override});
        }
        if (m.strategies.empty())
            throw ConfigError("manifest: strategy section names no strategies");
        const std::string methods = s.take("static_methods", "gat, ego-bfs, ego-rwr");
        m.static_methods = split_list(methods);
        for (const auto& method : m.static_methods)
            if (method != "gat" && method != "ego-bfs" && method != "ego-rwr")
                throw ConfigError("manifest: unknown static method '" + method + "'");
        s.reject_unconsumed("strategy");
    }

    {
        Section& s = section_or_empty("evaluation");
        m.runs = static_cast<int>(s.take_int("runs", m.runs));
        if (m.runs < 1) throw ConfigError("manifest: runs must be >= 1");
        m.eval_seed = static_cast<uint64_t>(s.take_int("seed", 1));
        const std::string out = s.take("out_dir", "");
        if (!out.empty()) m.out_dir = base_dir / out;
        s.reject_unconsumed("evaluation");
    }

    static const std::set<std::string> known{"dataset", "features", "sampler", "model",
                                             "train",   "strategy", "evaluation"};
    for (const auto& [name, sec] : sections)
        if (!known.count(name))
            throw ConfigError("manifest: unknown section [" + name + "]");

    return m;
}

TaskStream ExperimentManifest::open_dataset() const {
    if (mode == DatasetMode::Synth) return generate_task_stream(synth);
    TaskStream stream;
    int task_id = 1;
    for (const auto& tf : task_files) {
        stream.tasks.push_back(std::make_shared<TaskGraph>(load_task_graph(
            task_id, tf.edges, tf.features, tf.labels, tf.split_seed)));
        ++task_id;
    }
    stream.validate();
    return stream;
}

}  // namespace egocl
