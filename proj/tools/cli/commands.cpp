#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "prorl/checkpoint.hpp"
#include "prorl/eval.hpp"

namespace prorl::cli {

namespace fs = std::filesystem;

namespace {

// Exclusive ownership of an output directory. fopen "x" fails if the file
// exists, which is the whole point.
class DirectoryLock {
public:
    explicit DirectoryLock(const fs::path& dir) : path_(dir / ".lock") {
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f) throw Error(ErrorKind::Io, "output directory is locked or unwritable: " + path_.string());
        std::fclose(f);
    }
    ~DirectoryLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    fs::path path_;
};

std::ofstream open_output(const fs::path& path, std::ios::openmode mode = std::ios::trunc) {
    std::ofstream f(path, std::ios::out | mode);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
    f << std::setprecision(17);
    return f;
}

void write_text(const fs::path& path, const std::string& text) {
    auto f = open_output(path);
    f << text;
    if (!f) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::string checkpoint_name(std::uint64_t step) { return "checkpoint_step" + std::to_string(step) + ".ckpt"; }

RunPlan plan_for(const RunConfig& c) { return RunPlan{c.stages, c.total_steps, c.validation}; }

// Maps an exception to the documented exit code, printing it first.
template <class F>
int guarded(std::ostream& err, F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kConfigFailure;
    } catch (const CheckpointError& e) {
        err << "corrupt checkpoint (field " << e.field() << "): " << e.what() << "\n";
        return kRuntimeFailure;
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::InvalidConfig || e.kind() == ErrorKind::InvalidDifficulty ||
            e.kind() == ErrorKind::InvalidK) {
            err << "config error: " << e.what() << "\n";
            return kConfigFailure;
        }
        err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntimeFailure;
    }
}

} // namespace

RunResult run_training(const RunConfig& config, const fs::path& out_dir, const std::optional<TrainerState>& resume,
                       std::ostream* progress) {
    config.validate();
    fs::create_directories(out_dir);
    DirectoryLock lock(out_dir);

    write_text(out_dir / "config.json", serialize_config(config));
    auto metrics = open_output(out_dir / "metrics.jsonl", resume ? std::ios::app : std::ios::trunc);

    TrainerState state = resume ? *resume
                                : make_initial_state(config.model, config.init_std, config.optimizer,
                                                     config.stages.front(), config.seed);
    const auto validation_set =
        validation_instances(config.stages, config.validation.prompts_per_task, config.seed);

    const auto on_step = [&](const TrainerState& st, const StepMetrics& m) {
        metrics << metrics_record(m) << '\n';
        metrics.flush();
        if (!metrics) throw Error(ErrorKind::Io, "write failed: metrics.jsonl");
        if (config.checkpoint_every > 0 && st.global_step % config.checkpoint_every == 0) {
            write_file(out_dir / checkpoint_name(st.global_step), encode_trainer_state(st));
        }
        if (progress && m.val_pass1) {
            *progress << "step " << m.step << "  val pass@1 " << *m.val_pass1 << "  pass@n " << *m.val_pass_n
                      << "  entropy " << m.entropy << "  kl " << m.kl << std::endl;
        }
    };

    RunResult result = run_stages(std::move(state), plan_for(config), validation_set, on_step);
    write_file(out_dir / "final.ckpt", encode_trainer_state(result.state));
    return result;
}

RunConfig resolve_config(const TrainOptions& o) {
    RunConfig c = o.config_path ? load_config(*o.config_path) : RunConfig{};
    apply_env_overrides(c);
    if (o.seed) c.seed = *o.seed;
    if (o.out_dir) c.out_dir = *o.out_dir;
    if (o.steps) c.total_steps = *o.steps;
    c.validate();
    return c;
}

int cmd_train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = resolve_config(options);
        std::optional<TrainerState> resume;
        if (options.resume) resume = decode_trainer_state(read_file(*options.resume));
        const RunResult r = run_training(config, config.out_dir, resume, options.quiet ? nullptr : &out);
        out << "trained " << r.log.size() << " steps into " << config.out_dir << "\n";
        return int{kOk};
    });
}

int cmd_config(const TrainOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        out << serialize_config(resolve_config(options));
        return int{kOk};
    });
}

PolicyParameters load_any_policy(const fs::path& path) {
    const auto bytes = read_file(path);
    if (is_trainer_checkpoint(bytes)) return decode_trainer_state(bytes).policy;
    return decode_policy(bytes);
}

int cmd_eval(const EvalOptions& o, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (o.samples < 1) throw ConfigError("n", "need at least one sample");
        if (o.prompts < 1) throw ConfigError("prompts", "need at least one prompt");
        if (o.bins < 2) throw ConfigError("bins", "need at least two bins");
        for (std::size_t k : o.ks) {
            if (k < 1 || k > o.samples) {
                throw ConfigError("ks", "k = " + std::to_string(k) + " outside [1, " + std::to_string(o.samples) + "]");
            }
        }
        std::vector<tasks::Family> families;
        for (const auto& name : o.families) {
            try {
                families.push_back(tasks::parse_family(name));
            } catch (const Error&) {
                throw ConfigError("families", "unknown family '" + name + "'");
            }
        }

        const PolicyParameters policy = load_any_policy(o.checkpoint);
        fs::create_directories(o.out_dir);
        auto report = open_output(o.out_dir / "report.jsonl");
        auto curves = open_output(o.out_dir / "curves.csv");
        auto hist = open_output(o.out_dir / "histogram.csv");
        auto bounds = open_output(o.out_dir / "bounds.csv");
        auto sweep = open_output(o.out_dir / "sweep.csv");
        curves << "family,size,k,pass_at_k,upper_bound\n";
        hist << "family,size,bin_low,bin_high,count\n";
        bounds << "family,size,k,empirical,bound,holds\n";
        sweep << "family,size,prompts,n,pass1,mean_reward,pass1_variance\n";

        eval::SweepConfig sc;
        sc.samples = o.samples;
        sc.prompts = o.prompts;
        sc.ks = o.ks;
        sc.temperature = o.temperature;
        sc.max_len = o.max_len;
        sc.seed = o.seed;
        sc.modulus = o.modulus;

        for (tasks::Family family : families) {
            std::vector<int> sizes = o.sizes;
            if (sizes.empty()) sizes.push_back(tasks::default_difficulty(family).size);
            const auto name = tasks::family_name(family);
            for (const eval::SweepRow& row : eval::difficulty_sweep(policy, family, sizes, sc)) {
                const auto& curve = row.curve;
                const eval::Pass1Moments mom = eval::pass1_moments(row.matrix);
                const auto checks = eval::check_bound(row.matrix, o.ks);
                const eval::Histogram h = eval::pass1_histogram(row.matrix, o.bins);

                nlohmann::ordered_json j;
                j["family"] = name;
                j["size"] = row.size;
                j["prompts"] = row.matrix.prompts.size();
                j["n"] = row.matrix.n;
                j["temperature"] = row.matrix.temperature;
                j["ks"] = curve.ks;
                j["pass_at_k"] = curve.mean;
                j["upper_bound"] = curve.upper_bound;
                j["pass1_mean"] = mom.mean;
                j["pass1_variance"] = mom.variance;
                j["mean_reward"] = row.mean_reward;
                j["histogram"] = h.counts;
                report << j.dump() << '\n';

                for (std::size_t i = 0; i < curve.ks.size(); ++i) {
                    curves << name << ',' << row.size << ',' << curve.ks[i] << ',' << curve.mean[i] << ','
                           << curve.upper_bound[i] << '\n';
                }
                for (std::size_t b = 0; b < h.counts.size(); ++b) {
                    hist << name << ',' << row.size << ',' << h.edges[b] << ',' << h.edges[b + 1] << ','
                         << h.counts[b] << '\n';
                }
                for (const auto& c : checks) {
                    bounds << name << ',' << row.size << ',' << c.k << ',' << c.empirical << ',' << c.bound << ','
                           << (c.holds ? "true" : "false") << '\n';
                }
                sweep << name << ',' << row.size << ',' << row.matrix.prompts.size() << ',' << row.matrix.n << ','
                      << row.pass1 << ',' << row.mean_reward << ',' << mom.variance << '\n';
                out << name << " size " << row.size << "  pass@1 " << row.pass1 << "  pass@" << curve.ks.back()
                    << " " << curve.mean.back() << "\n";
            }
        }
        for (auto* f : {&report, &curves, &hist, &bounds, &sweep}) {
            f->flush();
            if (!*f) throw Error(ErrorKind::Io, "write failed in " + o.out_dir.string());
        }
        return int{kOk};
    });
}

std::vector<AblationVariant> ablation_variants(const RunConfig& base) {
    std::vector<AblationVariant> out;
    for (const bool clip_higher : {false, true}) {
        for (const bool with_kl : {false, true}) {
            for (const bool resets : {false, true}) {
                AblationVariant v;
                v.name = std::string(clip_higher ? "cliphigher" : "symmetric") + (with_kl ? "-kl" : "-nokl") +
                         (resets ? "-reset" : "-noreset");
                v.config = base;
                v.config.out_dir = (fs::path(base.out_dir) / v.name).string();
                for (StageConfig& s : v.config.stages) {
                    if (!clip_higher) s.clip.eps_high = s.clip.eps_low;
                    s.kl.beta = with_kl ? base.ablation.beta : 0.0;
                    s.reset = ResetPolicy{};
                    if (resets) {
                        s.reset.mode = ResetPolicy::Mode::Interval;
                        s.reset.interval = base.ablation.reset_interval;
                    }
                    s.reset_on_enter = resets && s.reset_on_enter;
                }
                out.push_back(std::move(v));
            }
        }
    }
    return out;
}

int cmd_ablate(const AblateOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig base = resolve_config(options.train);
        auto variants = ablation_variants(base);
        if (!options.only.empty()) {
            std::erase_if(variants, [&](const AblationVariant& v) {
                return std::find(options.only.begin(), options.only.end(), v.name) == options.only.end();
            });
            if (variants.empty()) throw ConfigError("only", "no variant matches");
        }
        fs::create_directories(base.out_dir);
        auto summary = open_output(fs::path(base.out_dir) / "summary.csv");
        auto trace = open_output(fs::path(base.out_dir) / "kl_trace.csv");
        summary << "variant,eps_high,beta,reset,final_entropy,final_val_pass1,final_kl,mean_kl\n";
        trace << "variant,step,kl,beta_kl\n";

        for (const AblationVariant& v : variants) {
            if (!options.train.quiet) out << "== " << v.name << "\n";
            const RunResult r = run_training(v.config, v.config.out_dir, std::nullopt,
                                             options.train.quiet ? nullptr : &out);
            double kl_sum = 0.0;
            for (const StepMetrics& m : r.log) {
                const double beta = v.config.stages[m.stage].kl.beta;
                trace << v.name << ',' << m.step << ',' << m.kl << ',' << beta * m.kl << '\n';
                kl_sum += m.kl;
            }
            const StageConfig& s0 = v.config.stages.front();
            summary << v.name << ',' << s0.clip.eps_high << ',' << s0.kl.beta << ','
                    << reset_mode_name(s0.reset.mode) << ',';
            if (r.log.empty()) {
                summary << ",,,";
            } else {
                summary << r.log.back().entropy << ',';
                if (!r.state.validation_history.empty()) summary << r.state.validation_history.back().pass1;
                summary << ',' << r.log.back().kl << ',' << kl_sum / static_cast<double>(r.log.size());
            }
            summary << '\n';
        }
        summary.flush();
        trace.flush();
        if (!summary || !trace) throw Error(ErrorKind::Io, "write failed in " + base.out_dir);
        return int{kOk};
    });
}

} // namespace prorl::cli
