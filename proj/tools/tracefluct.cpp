// tracefluct command line: experiments, exact variance tables, chain counts.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tracefluct/tracefluct.hpp"

namespace tf = tracefluct;

namespace {

struct CommonFlags {
    std::string config;
    std::vector<std::string> dists;
    std::vector<int> Ns;
    std::vector<int> orders;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format;
    std::vector<double> t;
    std::optional<unsigned> threads;
};

void add_data_flags(CLI::App* app, CommonFlags& f) {
    app->add_option("--dist", f.dists, "entry distribution(s): rademacher, gaussian, uniform, two_point(p)")
        ->delimiter(',');
    app->add_option("--n", f.Ns, "matrix size(s)")->delimiter(',');
    app->add_option("--k", f.orders, "order(s) k")->delimiter(',');
    app->add_option("--out", f.out, "output file (stdout when omitted)");
    app->add_option("--format", f.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
}

void add_experiment_flags(CLI::App* app, CommonFlags& f) {
    add_data_flags(app, f);
    app->add_option("--config", f.config, "JSON experiment config; flags override its fields");
    app->add_option("--trials", f.trials, "Monte Carlo trials M");
    app->add_option("--seed", f.seed, "master seed");
    app->add_option("--t", f.t, "frequencies of phi(x) = cos(t . x)")->delimiter(',');
    app->add_option("--threads", f.threads, "worker threads (0 = all cores)");
}

tf::ExperimentConfig merged_config(tf::ExperimentKind kind, const CommonFlags& f) {
    tf::ExperimentConfig c;
    if (!f.config.empty()) c = tf::load_config(f.config);
    c.kind = kind;
    if (!f.dists.empty()) c.dists = f.dists;
    if (!f.Ns.empty()) c.Ns = f.Ns;
    if (!f.orders.empty()) c.orders = f.orders;
    if (f.trials) c.trials = *f.trials;
    if (f.seed) c.seed = *f.seed;
    if (!f.t.empty()) c.t = f.t;
    if (!f.out.empty()) c.out = f.out;
    if (!f.format.empty()) c.format = f.format;
    if (f.threads) c.threads = *f.threads;
    if (kind == tf::ExperimentKind::universality && f.dists.empty() && f.config.empty()) {
        c.dists = {"rademacher", "gaussian"};
    }
    c.validate();
    return c;
}

int run_experiment_command(tf::ExperimentKind kind, const CommonFlags& f) {
    const tf::ExperimentConfig cfg = merged_config(kind, f);
    const tf::ExperimentReport rep = tf::run_experiment(cfg);
    if (cfg.out.empty()) {
        if (cfg.format == "csv") {
            tf::write_report_csv(std::cout, rep);
        } else {
            tf::write_report_json(std::cout, rep);
        }
    } else {
        for (const auto& p : tf::emit_report(rep, cfg.format, cfg.out)) std::cerr << "wrote " << p.string() << '\n';
    }
    std::size_t failed = 0;
    for (const auto& c : rep.checks) {
        if (!c.passed) {
            ++failed;
            std::cerr << "check failed: " << c.name << " (" << c.detail << ")\n";
        }
    }
    std::fprintf(stderr, "runtime_seconds=%.3f checks=%zu failed=%zu\n", rep.runtime_seconds, rep.checks.size(), failed);
    return failed ? static_cast<int>(tf::ExitCode::violation) : 0;
}

// CSV or JSON table with a fixed column list.
class Table {
public:
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}
    void add(std::vector<nlohmann::json> row) { rows_.push_back(std::move(row)); }

    void write(std::ostream& os, const std::string& format) const {
        if (format == "json") {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& r : rows_) {
                nlohmann::json o;
                for (std::size_t i = 0; i < columns_.size(); ++i) o[columns_[i]] = r[i];
                arr.push_back(std::move(o));
            }
            os << arr.dump(2) << '\n';
            return;
        }
        for (std::size_t i = 0; i < columns_.size(); ++i) os << (i ? "," : "") << columns_[i];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) os << ',';
                if (r[i].is_string()) {
                    os << tf::detail::csv_field(r[i].get<std::string>());
                } else if (r[i].is_number_float()) {
                    os << tf::detail::fmt(r[i].get<double>());
                } else {
                    os << r[i].dump();
                }
            }
            os << '\n';
        }
    }

    void emit(const std::string& out, const std::string& format) const {
        const std::string fmt = format.empty() ? "csv" : format;
        if (out.empty()) {
            write(std::cout, fmt);
            return;
        }
        std::ofstream os(out, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + out);
        write(os, fmt);
        if (!os) throw std::runtime_error("write failed for " + out);
        std::cerr << "wrote " << out << '\n';
    }

private:
    std::vector<std::string> columns_;
    std::vector<std::vector<nlohmann::json>> rows_;
};

int run_variance(const CommonFlags& f, const std::string& part_flag) {
    const std::vector<std::string> dists = f.dists.empty() ? std::vector<std::string>{"gaussian"} : f.dists;
    const std::vector<int> Ns = f.Ns.empty() ? std::vector<int>{2, 3, 4, 5, 6} : f.Ns;
    const std::vector<int> orders = f.orders.empty() ? std::vector<int>{2} : f.orders;
    std::vector<tf::VariancePart> parts;
    if (part_flag == "all") {
        parts = {tf::VariancePart::full, tf::VariancePart::d_part, tf::VariancePart::remainder};
    } else {
        parts = {tf::parse_variance_part(part_flag)};
    }
    for (int N : Ns) {
        if (N < 2) throw tf::UsageError("every N must be >= 2");
        for (int k : orders) {
            if (k < 1) throw tf::UsageError("orders must be >= 1");
            tf::require_pair_budget(N, k, "variance");
        }
    }
    Table table({"dist", "N", "k", "part", "value"});
    int failed = 0;
    for (const auto& name : dists) {
        const tf::EntryDistribution d = tf::make_distribution(name);
        for (int N : Ns) {
            for (int k : orders) {
                std::map<tf::VariancePart, double> v;
                for (auto p : {tf::VariancePart::full, tf::VariancePart::d_part, tf::VariancePart::remainder}) {
                    v[p] = tf::exact_variance(d, N, k, p);
                }
                for (auto p : parts) table.add({d.name(), N, k, tf::to_string(p), v[p]});
                const double full = v[tf::VariancePart::full];
                const double sum = v[tf::VariancePart::d_part] + v[tf::VariancePart::remainder];
                if (std::abs(full - sum) > 1e-9 * std::max(1.0, std::abs(full))) {
                    std::cerr << "violation: full variance differs from d_part + remainder for " << d.name()
                              << " N=" << N << " k=" << k << '\n';
                    ++failed;
                }
                if (d.kind() == tf::EntryDistribution::Kind::gaussian) {
                    const double perm = tf::gaussian_dpart_variance_permutation_form(N, k);
                    if (std::abs(perm - v[tf::VariancePart::d_part]) > 1e-9 * std::max(1.0, perm)) {
                        std::cerr << "violation: permutation form differs for N=" << N << " k=" << k << '\n';
                        ++failed;
                    }
                }
            }
        }
    }
    table.emit(f.out, f.format);
    return failed ? static_cast<int>(tf::ExitCode::violation) : 0;
}

int run_chains(const CommonFlags& f) {
    const std::vector<int> ks = f.orders.empty() ? std::vector<int>{2, 3} : f.orders;
    const std::vector<int> Ns = f.Ns.empty() ? std::vector<int>{2, 3, 4} : f.Ns;
    for (int k : ks) {
        if (k < 2 || k > 8) throw tf::UsageError("chains needs 2 <= k <= 8");
        for (int N : Ns) {
            if (N < 1) throw tf::UsageError("every N must be >= 1");
            tf::require_pair_budget(N, k, "chains");
        }
    }
    Table table({"k", "N", "partition-RGS", "class-kind", "count", "ratio"});
    int failed = 0;
    auto fail = [&](const std::string& msg) {
        std::cerr << "violation: " << msg << '\n';
        ++failed;
    };
    for (int k : ks) {
        std::map<std::string, std::map<int, double>> c_ratio;  // rgs -> N -> ratio
        for (int N : Ns) {
            const double scale = tf::int_pow(N, k - 1);
            double walks_total = 0.0;
            for (const auto& pi : tf::enumerate_partitions(k, tf::PartitionFamily::all)) {
                const double w = static_cast<double>(tf::walks_with_partition(pi, N).size());
                walks_total += w;
                table.add({k, N, pi.rgs_string(), "walks", w, w / scale});
            }
            table.add({k, N, "*", "walks_total", walks_total, walks_total / scale});
            if (walks_total != tf::int_pow(N, k)) fail("walk counts do not sum to N^k");
            for (const auto& pi : tf::enumerate_partitions(k, tf::PartitionFamily::Q)) {
                const auto plain = tf::enumerate_class(tf::ChainClassDescriptor::plain(pi), k, N);
                const double c = static_cast<double>(plain.count);
                table.add({k, N, pi.rgs_string(), "plain", c, c / scale});
                c_ratio[pi.rgs_string()][N] = c / scale;
                if (pi.block_count() == 1 && c != N) fail("one-block class count differs from N");
                double cover = 0.0;
                for (const auto& desc : tf::union_family(pi)) {
                    const double n = static_cast<double>(tf::enumerate_class(desc, k, N).count);
                    cover += n;
                    table.add({k, N, pi.rgs_string(), desc.label(), n, n / scale});
                }
                if (cover < c) fail("union family does not cover class " + pi.rgs_string());
                for (const auto& w : tf::proof_witnesses(pi)) {
                    const int q = static_cast<int>(w.D.size() + w.E.size());
                    if (q > k - 1) fail("witness for " + pi.rgs_string() + " uses more than k-1 indices");
                    if (!tf::dof_witness_check(w.descriptor, k, N, w.D, w.E)) {
                        fail("witness " + w.construction + " fails for " + pi.rgs_string() + " " + w.descriptor.label());
                    } else {
                        const double n = static_cast<double>(tf::enumerate_class(w.descriptor, k, N).count);
                        if (n > tf::int_pow(N, q)) fail("class count exceeds N^q for " + w.descriptor.label());
                    }
                }
            }
        }
        for (const auto& [rgs, by_n] : c_ratio) {
            if (!by_n.contains(2) || !by_n.contains(3)) continue;
            const double cap = 1.5 * std::max(by_n.at(2), by_n.at(3));
            for (const auto& [N, r] : by_n) {
                if (r > cap) fail("ratio for " + rgs + " at N=" + std::to_string(N) + " exceeds the surrogate bound");
            }
        }
    }
    table.emit(f.out, f.format);
    return failed ? static_cast<int>(tf::ExitCode::violation) : 0;
}

int run_kernel(const CommonFlags& f) {
    if (f.orders.size() != 1 || f.Ns.size() != 1) throw tf::UsageError("kernel needs exactly one --k and one --n");
    tf::require_cycle_budget(f.Ns[0], f.orders[0], "kernel");
    const tf::SymmetricKernel kern = tf::build_kernel_fkN(f.orders[0], f.Ns[0]);
    if (f.out.empty()) {
        tf::write_kernel_csv(std::cout, kern);
        return 0;
    }
    std::ofstream os(f.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + f.out);
    tf::write_kernel_csv(os, kern);
    return 0;
}

int run_moments(const CommonFlags& f) {
    const std::vector<std::string> dists = f.dists.empty() ? std::vector<std::string>{"gaussian"} : f.dists;
    std::ostringstream ss;
    bool first = true;
    for (const auto& name : dists) {
        std::ostringstream one;
        tf::write_moments_csv(one, tf::make_distribution(name));
        std::string s = one.str();
        if (!first) s = s.substr(s.find('\n') + 1);
        ss << s;
        first = false;
    }
    if (f.out.empty()) {
        std::cout << ss.str();
        return 0;
    }
    std::ofstream os(f.out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + f.out);
    os << ss.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fluctuations of traces of powers of non-Hermitian random matrices"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string part = "all";
    struct Sub {
        const char* name;
        const char* help;
        std::optional<tf::ExperimentKind> kind;
    };
    const std::vector<Sub> subs{
        {"simulate", "joint CLT of centered traces", tf::ExperimentKind::clt},
        {"universality", "compare entry distributions through cos(t . Q)", tf::ExperimentKind::universality},
        {"decay", "contraction norms of f_{k,N} and fourth moments", tf::ExperimentKind::decay},
        {"bound", "Monte Carlo distance against the invariance bound", tf::ExperimentKind::bound},
    };
    std::map<CLI::App*, tf::ExperimentKind> experiment_cmds;
    for (const auto& s : subs) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        add_experiment_flags(cmd, flags);
        experiment_cmds[cmd] = *s.kind;
    }
    CLI::App* variance = app.add_subcommand("variance", "exact variance tables (dist,N,k,part,value)");
    add_data_flags(variance, flags);
    variance->add_option("--part", part, "full, d_part, remainder or all")
        ->check(CLI::IsMember({"all", "full", "d_part", "remainder"}));
    CLI::App* chains = app.add_subcommand("chains", "chain class counts (k,N,partition-RGS,class-kind,count,ratio)");
    add_data_flags(chains, flags);
    CLI::App* kernel = app.add_subcommand("kernel", "dump the kernel f_{k,N} as CSV");
    add_data_flags(kernel, flags);
    CLI::App* moments = app.add_subcommand("moments", "dump entry moment tables as CSV");
    add_data_flags(moments, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(tf::ExitCode::configuration);
    }

    try {
        for (const auto& [cmd, kind] : experiment_cmds) {
            if (cmd->parsed()) return run_experiment_command(kind, flags);
        }
        if (variance->parsed()) return run_variance(flags, part);
        if (chains->parsed()) return run_chains(flags);
        if (kernel->parsed()) return run_kernel(flags);
        if (moments->parsed()) return run_moments(flags);
    } catch (const tf::BudgetError& e) {
        std::cerr << "budget refusal: " << e.what() << '\n';
        return static_cast<int>(tf::ExitCode::budget);
    } catch (const tf::UsageError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return static_cast<int>(tf::ExitCode::configuration);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(tf::ExitCode::configuration);
    }
    return 0;
}
