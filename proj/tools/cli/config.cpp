#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace prorl::cli {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported as unknown.
class ObjectReader {
public:
    ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(display(), "expected an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        const json* v = take(key);
        if (!v) return;
        out = convert<T>(*v, field(key));
    }

    template <class F>
    void object(const char* key, F&& body) {
        const json* v = take(key);
        if (!v) return;
        ObjectReader child(*v, field(key));
        body(child);
        child.finish();
    }

    template <class F>
    void array(const char* key, F&& body) {
        const json* v = take(key);
        if (!v) return;
        if (!v->is_array()) throw ConfigError(field(key), "expected an array");
        for (std::size_t i = 0; i < v->size(); ++i) body((*v)[i], field(key) + "[" + std::to_string(i) + "]");
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(field(item.key().c_str()), "unknown key");
        }
    }

private:
    const json* take(const char* key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string display() const { return path_.empty() ? "<root>" : path_; }

    template <class T>
    static T convert(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
            return v.get<bool>();
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError(where, "expected a string");
            return v.get<std::string>();
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where, "expected a number");
            return v.get<T>();
        } else if constexpr (std::is_unsigned_v<T>) {
            if (!v.is_number_unsigned()) throw ConfigError(where, "expected a non-negative integer");
            return v.get<T>();
        } else {
            if (!v.is_number_integer()) throw ConfigError(where, "expected an integer");
            const auto wide = v.get<std::int64_t>();
            if (wide < std::numeric_limits<T>::min() || wide > std::numeric_limits<T>::max()) {
                throw ConfigError(where, "integer out of range");
            }
            return static_cast<T>(wide);
        }
    }

    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

TaskWeight read_task(const json& node, const std::string& path) {
    TaskWeight t;
    ObjectReader r(node, path);
    std::string family = std::string(tasks::family_name(t.family));
    r.read("family", family);
    try {
        t.family = tasks::parse_family(family);
    } catch (const Error& e) {
        throw ConfigError(path + ".family", "unknown family '" + family + "'");
    }
    t.difficulty = tasks::default_difficulty(t.family);
    r.read("size", t.difficulty.size);
    r.read("modulus", t.difficulty.modulus);
    r.read("weight", t.weight);
    r.finish();
    return t;
}

StageConfig read_stage(const json& node, const std::string& path) {
    StageConfig s = default_stage();
    ObjectReader r(node, path);
    r.read("steps", s.steps);
    r.read("max_len", s.max_len);
    r.read("temperature", s.temperature);
    r.read("rollouts", s.rollouts);
    r.read("batch_size", s.batch_size);
    r.read("minibatch_size", s.minibatch_size);
    r.read("eps_low", s.clip.eps_low);
    r.read("eps_high", s.clip.eps_high);
    r.read("beta", s.kl.beta);
    r.read("shaping_penalty", s.shaping_penalty);
    r.read("reset_on_enter", s.reset_on_enter);
    r.object("reset", [&](ObjectReader& rr) {
        std::string mode(reset_mode_name(s.reset.mode));
        rr.read("mode", mode);
        try {
            s.reset.mode = parse_reset_mode(mode);
        } catch (const Error&) {
            throw ConfigError(path + ".reset.mode", "expected none, interval or stagnation");
        }
        rr.read("interval", s.reset.interval);
        rr.read("window", s.reset.window);
        rr.read("min_improvement", s.reset.min_improvement);
    });
    if (node.contains("tasks")) s.tasks.clear();
    r.array("tasks", [&](const json& item, const std::string& where) { s.tasks.push_back(read_task(item, where)); });
    r.finish();
    return s;
}

std::string line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

// Rethrows a library validation error against the field that owns it.
template <class F>
void check(const std::string& field, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(field, e.what());
    }
}

} // namespace

void RunConfig::validate() const {
    if (out_dir.empty()) throw ConfigError("out_dir", "must not be empty");
    if (!(init_std >= 0.0) || !std::isfinite(init_std)) throw ConfigError("init_std", "must be finite and >= 0");
    check("model", [&] { model.validate(); });
    if (model.vocab_size < symbols::kStandardSize) {
        throw ConfigError("model.vocab_size", "task encodings need at least " +
                                                  std::to_string(symbols::kStandardSize) + " tokens");
    }
    check("optimizer", [&] { optimizer.validate(); });
    if (validation.samples == 1) throw ConfigError("validation.samples", "need at least 2 samples or 0");
    if (!(validation.temperature > 0.0)) throw ConfigError("validation.temperature", "must be > 0");
    if (stages.empty()) throw ConfigError("stages", "need at least one stage");
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const std::string where = "stages[" + std::to_string(i) + "]";
        const StageConfig& s = stages[i];
        if (s.batch_size >= 1 && s.minibatch_size >= 1 && s.batch_size % s.minibatch_size != 0) {
            throw ConfigError(where + ".minibatch_size", "does not divide batch_size " + std::to_string(s.batch_size));
        }
        check(where, [&] { s.validate(); });
    }
    if (!(ablation.beta > 0.0)) throw ConfigError("ablation.beta", "must be > 0");
    if (ablation.reset_interval == 0) throw ConfigError("ablation.reset_interval", "must be > 0");
}

RunConfig parse_config(std::string_view text) {
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(line_column(text, e.byte == 0 ? 0 : e.byte - 1), "malformed JSON");
    }
    RunConfig c;
    ObjectReader r(root, "");
    r.read("seed", c.seed);
    r.read("out_dir", c.out_dir);
    r.read("total_steps", c.total_steps);
    r.read("checkpoint_every", c.checkpoint_every);
    r.read("init_std", c.init_std);
    r.object("model", [&](ObjectReader& m) {
        m.read("vocab_size", c.model.vocab_size);
        m.read("embed_dim", c.model.embed_dim);
        m.read("hidden_dim", c.model.hidden_dim);
        m.read("window", c.model.window);
    });
    r.object("optimizer", [&](ObjectReader& o) {
        o.read("lr", c.optimizer.lr);
        o.read("beta1", c.optimizer.beta1);
        o.read("beta2", c.optimizer.beta2);
        o.read("eps", c.optimizer.eps);
        o.read("weight_decay", c.optimizer.weight_decay);
    });
    r.object("validation", [&](ObjectReader& v) {
        v.read("cadence", c.validation.cadence);
        v.read("prompts_per_task", c.validation.prompts_per_task);
        v.read("samples", c.validation.samples);
        v.read("temperature", c.validation.temperature);
        v.read("at_start", c.validation.at_start);
    });
    if (root.contains("stages")) c.stages.clear();
    r.array("stages", [&](const json& item, const std::string& where) { c.stages.push_back(read_stage(item, where)); });
    r.object("ablation", [&](ObjectReader& a) {
        a.read("beta", c.ablation.beta);
        a.read("reset_interval", c.ablation.reset_interval);
    });
    r.finish();
    c.validate();
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot read config " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string serialize_config(const RunConfig& c) {
    ordered_json root;
    root["seed"] = c.seed;
    root["out_dir"] = c.out_dir;
    root["total_steps"] = c.total_steps;
    root["checkpoint_every"] = c.checkpoint_every;
    root["init_std"] = c.init_std;
    root["model"] = {{"vocab_size", c.model.vocab_size},
                     {"embed_dim", c.model.embed_dim},
                     {"hidden_dim", c.model.hidden_dim},
                     {"window", c.model.window}};
    root["optimizer"] = {{"lr", c.optimizer.lr},
                         {"beta1", c.optimizer.beta1},
                         {"beta2", c.optimizer.beta2},
                         {"eps", c.optimizer.eps},
                         {"weight_decay", c.optimizer.weight_decay}};
    root["validation"] = {{"cadence", c.validation.cadence},
                          {"prompts_per_task", c.validation.prompts_per_task},
                          {"samples", c.validation.samples},
                          {"temperature", c.validation.temperature},
                          {"at_start", c.validation.at_start}};
    ordered_json stages = ordered_json::array();
    for (const StageConfig& s : c.stages) {
        ordered_json js;
        js["steps"] = s.steps;
        js["max_len"] = s.max_len;
        js["temperature"] = s.temperature;
        js["rollouts"] = s.rollouts;
        js["batch_size"] = s.batch_size;
        js["minibatch_size"] = s.minibatch_size;
        js["eps_low"] = s.clip.eps_low;
        js["eps_high"] = s.clip.eps_high;
        js["beta"] = s.kl.beta;
        js["shaping_penalty"] = s.shaping_penalty;
        js["reset_on_enter"] = s.reset_on_enter;
        js["reset"] = {{"mode", reset_mode_name(s.reset.mode)},
                       {"interval", s.reset.interval},
                       {"window", s.reset.window},
                       {"min_improvement", s.reset.min_improvement}};
        ordered_json tasks = ordered_json::array();
        for (const TaskWeight& t : s.tasks) {
            tasks.push_back({{"family", tasks::family_name(t.family)},
                             {"size", t.difficulty.size},
                             {"modulus", t.difficulty.modulus},
                             {"weight", t.weight}});
        }
        js["tasks"] = std::move(tasks);
        stages.push_back(std::move(js));
    }
    root["stages"] = std::move(stages);
    root["ablation"] = {{"beta", c.ablation.beta}, {"reset_interval", c.ablation.reset_interval}};
    return root.dump(2) + "\n";
}

void apply_env_overrides(RunConfig& config, const std::function<std::optional<std::string>(const char*)>& getenv) {
    const auto lookup = [&](const char* name) -> std::optional<std::string> {
        if (getenv) return getenv(name);
        const char* v = std::getenv(name);
        return v ? std::optional<std::string>(v) : std::nullopt;
    };
    if (const auto seed = lookup("PRORL_SEED")) {
        try {
            std::size_t used = 0;
            const unsigned long long v = std::stoull(*seed, &used);
            if (used != seed->size()) throw std::invalid_argument("trailing characters");
            config.seed = v;
        } catch (const std::exception&) {
            throw ConfigError("PRORL_SEED", "expected a non-negative integer, got '" + *seed + "'");
        }
    }
    if (const auto out = lookup("PRORL_OUT")) {
        if (out->empty()) throw ConfigError("PRORL_OUT", "must not be empty");
        config.out_dir = *out;
    }
}

} // namespace prorl::cli
