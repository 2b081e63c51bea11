#include "cstk/cli.hpp"

#include "cstk/bayes.hpp"
#include "cstk/belt.hpp"
#include "cstk/blind.hpp"
#include "cstk/combine.hpp"
#include "cstk/coverage.hpp"
#include "cstk/energy.hpp"
#include "cstk/error.hpp"
#include "cstk/gof.hpp"
#include "cstk/parallel.hpp"
#include "cstk/prob.hpp"
#include "cstk/profile.hpp"
#include "cstk/significance.hpp"
#include "cstk/systematics.hpp"
#include "cstk/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

namespace cstk::cli {

using nlohmann::json;

namespace {

// ---- output helpers ----

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(const std::vector<double>& vals) {
        std::vector<std::string> row;
        row.reserve(vals.size());
        for (double v : vals) row.push_back(fmt6(v));
        rows.push_back(std::move(row));
    }
    std::string to_csv() const {
        std::ostringstream out;
        for (std::size_t i = 0; i < header.size(); ++i) {
            out << (i ? "," : "") << header[i];
        }
        out << "\n";
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
            out << "\n";
        }
        return out.str();
    }
};

struct Emission {
    Table table;
    json result;   // structured payload for --format json
    json manifest; // command, parameters, seed, version, wall time
};

struct GlobalOpts {
    std::string out;
    std::string format = "csv";
    std::optional<std::uint64_t> seed;
    int threads = 0;
};

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ComputationError("cannot open output file '" + path + "'");
    f << content;
    if (!f) throw ComputationError("failed writing output file '" + path + "'");
}

void emit(const Emission& em, const GlobalOpts& g) {
    if (g.format == "json") {
        json doc = em.result;
        doc["manifest"] = em.manifest;
        const std::string text = doc.dump(2) + "\n";
        if (g.out.empty()) {
            std::cout << text;
        } else {
            write_file(g.out, text);
        }
        return;
    }
    const std::string csv = em.table.to_csv();
    if (g.out.empty()) {
        std::cout << csv;
        std::cerr << "manifest: " << em.manifest.dump() << "\n";
    } else {
        write_file(g.out, csv);
        write_file(g.out + ".manifest.json", em.manifest.dump(2) + "\n");
    }
}

json interval_json(const IntervalResult& iv) {
    json j;
    j["method"] = iv.method;
    j["cl"] = iv.cl;
    j["empty"] = iv.empty;
    if (!iv.empty) {
        j["lower"] = *iv.lower;
        j["upper"] = *iv.upper;
    }
    return j;
}

// ---- small file parsers ----

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
    }
    return out;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DomainError("cannot parse number '" + s + "' in " + what);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ComputationError("cannot open file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool is_number_row(const std::vector<std::string>& fields) {
    if (fields.empty()) return false;
    char* end = nullptr;
    const double v = std::strtod(fields[0].c_str(), &end);
    (void)v;
    return end != fields[0].c_str() && *end == '\0';
}

std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                  std::size_t min_cols) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = split_csv(line);
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (!fields.empty() && fields[0].rfind('#', 0) == 0) continue;
        if (rows.empty() && !is_number_row(fields)) continue; // header
        std::vector<double> row;
        for (const auto& f : fields) {
            if (f.empty()) continue;
            row.push_back(parse_double(f, path + ":" + std::to_string(lineno)));
        }
        if (row.size() < min_cols) {
            throw DomainError(path + ":" + std::to_string(lineno) + ": expected at least " +
                              std::to_string(min_cols) + " columns");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw DomainError(path + ": no data rows");
    return rows;
}

BinnedData read_binned_csv(const std::string& path) {
    // Rows: x_lo, x_hi, count [, variance]
    const auto rows = read_numeric_csv(path, 3);
    BinnedData data;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 0) data.edges.push_back(rows[i][0]);
        if (std::fabs(rows[i][0] - data.edges.back()) > 1e-9 * (1.0 + std::fabs(rows[i][0]))) {
            throw DomainError(path + ": bins are not contiguous");
        }
        data.edges.push_back(rows[i][1]);
        data.counts.push_back(rows[i][2]);
        if (rows[i].size() >= 4) data.variance.push_back(rows[i][3]);
    }
    if (!data.variance.empty() && data.variance.size() != data.counts.size()) {
        throw DomainError(path + ": variance column must be present in every row or none");
    }
    data.check();
    return data;
}

std::vector<double> parse_double_list(const std::string& csv, const std::string& what) {
    std::vector<double> out;
    for (const auto& f : split_csv(csv)) {
        if (!f.empty()) out.push_back(parse_double(f, what));
    }
    if (out.empty()) throw DomainError(what + ": empty list");
    return out;
}

std::vector<std::int64_t> parse_int_list(const std::string& csv, const std::string& what) {
    std::vector<std::int64_t> out;
    for (double v : parse_double_list(csv, what)) {
        out.push_back(static_cast<std::int64_t>(std::llround(v)));
    }
    return out;
}

std::vector<double> make_grid(double lo, double hi, double step) {
    if (!(step > 0.0) || hi < lo) throw DomainError("bad grid specification");
    std::vector<double> g;
    for (double s = lo; s <= hi + 0.5 * step; s += step) g.push_back(s);
    return g;
}

Observation make_observation(const CountingModel& model, std::int64_t n,
                             const std::string& sub_counts_csv) {
    if (sub_counts_csv.empty()) return nominal_observation(model, n);
    return Observation(n, parse_int_list(sub_counts_csv, "--sub-counts"));
}

} // namespace

CountingModel parse_model_text(const std::string& text, const std::string& source_name) {
    std::optional<double> b_mean, eff_mean, tau;
    double b_rel = 0.0, eff_rel = 0.0;
    std::optional<SubsidiaryForm> b_form, eff_form;

    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto comment = line.find('#');
        if (comment != std::string::npos) line.erase(comment);
        std::string key, value;
        const auto eq = line.find('=');
        const auto diag = [&](const std::string& msg) {
            return DomainError(source_name + ":" + std::to_string(lineno) + ": " + msg);
        };
        {
            std::string trimmed = line;
            trimmed.erase(0, trimmed.find_first_not_of(" \t\r"));
            if (trimmed.empty()) continue;
        }
        if (eq == std::string::npos) throw diag("expected 'key = value'");
        key = line.substr(0, eq);
        value = line.substr(eq + 1);
        const auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t\r"));
            const auto end = s.find_last_not_of(" \t\r");
            s.erase(end == std::string::npos ? 0 : end + 1);
        };
        trim(key);
        trim(value);
        if (value.empty()) throw diag("missing value for key '" + key + "'");

        if (key == "b_mean") b_mean = parse_double(value, source_name);
        else if (key == "b_rel_sigma") b_rel = parse_double(value, source_name);
        else if (key == "eff_mean") eff_mean = parse_double(value, source_name);
        else if (key == "eff_rel_sigma") eff_rel = parse_double(value, source_name);
        else if (key == "tau") tau = parse_double(value, source_name);
        else if (key == "b_form") b_form = subsidiary_form_from_string(value);
        else if (key == "eff_form") eff_form = subsidiary_form_from_string(value);
        else throw diag("unknown key '" + key + "'");
    }
    if (!b_mean) throw DomainError(source_name + ": missing required key 'b_mean'");
    if (!eff_mean) throw DomainError(source_name + ": missing required key 'eff_mean'");

    const auto default_form = [](double rel) {
        return rel == 0.0 ? SubsidiaryForm::Exact : SubsidiaryForm::GammaFromCount;
    };
    Nuisance b{*b_mean, b_rel, b_form.value_or(default_form(b_rel))};
    Nuisance eff{*eff_mean, eff_rel, eff_form.value_or(default_form(eff_rel))};
    return CountingModel(b, eff, tau);
}

CountingModel parse_model_file(const std::string& path) {
    return parse_model_text(read_file(path), path);
}

namespace {

json model_json(const CountingModel& m) {
    json j;
    j["b_mean"] = m.background.mean;
    j["b_rel_sigma"] = m.background.rel_sigma;
    j["b_form"] = to_string(m.background.form);
    j["eff_mean"] = m.efficiency.mean;
    j["eff_rel_sigma"] = m.efficiency.rel_sigma;
    j["eff_form"] = to_string(m.efficiency.form);
    if (m.tau_override) j["tau"] = *m.tau_override;
    return j;
}

struct CommandContext {
    GlobalOpts global;
    std::string command_line;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    json manifest(json parameters) const {
        json m;
        m["command"] = command_line;
        m["parameters"] = std::move(parameters);
        if (global.seed) m["seed"] = *global.seed;
        m["toolkit_version"] = kVersion;
        const auto elapsed = std::chrono::steady_clock::now() - start;
        m["wall_time_s"] =
            std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
        return m;
    }

    std::uint64_t require_seed() const {
        if (!global.seed) {
            throw DomainError("this command is stochastic: --seed is required "
                              "(there is no default seed)");
        }
        return *global.seed;
    }
};

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"cstk " + std::string(kVersion) +
                 " - statistics toolkit for Poisson counting experiments"};
    app.require_subcommand(1);

    CommandContext ctx;
    ctx.command_line = "cstk";
    for (const auto& a : args) ctx.command_line += " " + a;

    GlobalOpts& g = ctx.global;
    app.add_option("--out", g.out, "Write results to this file instead of stdout");
    app.add_option("--format", g.format, "Output format")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value,
                                    "Random seed (required by stochastic commands)");
    app.add_option("--threads", g.threads, "Worker thread cap (0 = hardware)");

    // ---- limit ----
    auto* limit = app.add_subcommand(
        "limit", "Signal upper limits / intervals. Methods: fc (Feldman-Cousins unified, "
                 "likelihood-ratio ordering), classical (Neyman upper limit; can be empty), "
                 "bayes (flat signal prior, marginalized nuisances), profile "
                 "(profile-likelihood threshold rule)");
    std::string limit_method;
    std::int64_t limit_n = 0;
    double limit_b = 0.0, limit_cl = 0.90;
    std::string limit_model, limit_subcounts;
    limit->add_option("--method", limit_method, "fc | classical | bayes | profile")->required();
    limit->add_option("--n", limit_n, "Observed count")->required();
    limit->add_option("--b", limit_b, "Known background (nuisance-free methods)");
    limit->add_option("--cl", limit_cl, "Confidence / credibility level")->capture_default_str();
    limit->add_option("--model", limit_model, "Counting model file");
    limit->add_option("--sub-counts", limit_subcounts,
                      "Observed subsidiary counts (comma separated; default: nominal)");

    // ---- pvalue ----
    auto* pv = app.add_subcommand(
        "pvalue", "Discovery p-value for an observed count. Strategies for an uncertain "
                  "background: plug-in, prior-predictive, posterior-predictive, supremum, "
                  "ci-adjusted, conditioning (on/off binomial)");
    std::int64_t pv_n = 0;
    double pv_b = -1.0, pv_gamma = 1e-8;
    std::string pv_model, pv_strategy, pv_range, pv_subcounts;
    pv->add_option("--n", pv_n, "Observed count")->required();
    pv->add_option("--b", pv_b, "Known background");
    pv->add_option("--model", pv_model, "Counting model file (for uncertain background)");
    pv->add_option("--strategy", pv_strategy, "Nuisance strategy (default: exact counting)");
    pv->add_option("--range", pv_range, "Nuisance range lo,hi (supremum / ci-adjusted)");
    pv->add_option("--gamma", pv_gamma, "ci-adjusted addend")->capture_default_str();
    pv->add_option("--sub-counts", pv_subcounts, "Observed subsidiary counts");

    // ---- cls ----
    auto* clsc = app.add_subcommand(
        "cls", "CLs = (1-p1)/(1-p0) for the counting statistic; protects against excluding "
               "a signal the experiment cannot see. Optionally invert for an upper limit");
    std::int64_t cls_n = 0;
    double cls_b = 0.0, cls_s = -1.0, cls_cl = 0.90;
    bool cls_ul = false;
    clsc->add_option("--n", cls_n, "Observed count")->required();
    clsc->add_option("--b", cls_b, "Known background")->required();
    clsc->add_option("--s", cls_s, "Signal hypothesis to test");
    clsc->add_flag("--ul", cls_ul, "Report the CLs upper limit at --cl instead");
    clsc->add_option("--cl", cls_cl, "Confidence level for --ul")->capture_default_str();

    // ---- sensitivity ----
    auto* sens = app.add_subcommand(
        "sensitivity", "Punzi sensitivity (smallest signal guaranteeing discovery power) or "
                       "median expected upper limit over toys");
    std::string sens_mode, sens_method = "bayes", sens_model;
    double sens_alpha = 2.8665157e-7, sens_cl = 0.95, sens_b = 0.0, sens_eff = 1.0;
    std::int64_t sens_toys = 1001;
    sens->add_option("--mode", sens_mode, "punzi | median")->required();
    sens->add_option("--alpha", sens_alpha, "Discovery significance level (punzi)")
        ->capture_default_str();
    sens->add_option("--cl", sens_cl, "Power requirement (punzi) or limit CL (median)")
        ->capture_default_str();
    sens->add_option("--b", sens_b, "Known background");
    sens->add_option("--eff", sens_eff, "Known efficiency")->capture_default_str();
    sens->add_option("--model", sens_model, "Counting model file");
    sens->add_option("--method", sens_method, "Limit method for median mode")
        ->capture_default_str();
    sens->add_option("--n-toys", sens_toys, "Toy count (odd) for median mode")
        ->capture_default_str();

    // ---- coverage ----
    auto* cov = app.add_subcommand(
        "coverage", "Toy-MC coverage scan of an interval method over true signal values "
                    "(fc, classical, bayes, profile, or the Gaussian flip-flop policy)");
    std::string cov_method, cov_model;
    double cov_cl = 0.90, cov_smin = 0.0, cov_smax = 20.0, cov_ds = 0.1, cov_switch = 3.0;
    std::int64_t cov_toys = 10000;
    bool cov_exact = false;
    cov->add_option("--method", cov_method, "fc | classical | bayes | profile | flip-flop")
        ->required();
    cov->add_option("--model", cov_model, "Counting model file (counting methods)");
    cov->add_option("--cl", cov_cl, "Nominal confidence level")->capture_default_str();
    cov->add_option("--s-min", cov_smin, "Grid start")->capture_default_str();
    cov->add_option("--s-max", cov_smax, "Grid end")->capture_default_str();
    cov->add_option("--ds", cov_ds, "Grid step")->capture_default_str();
    cov->add_option("--n-toys", cov_toys, "Toys per grid point")->capture_default_str();
    cov->add_option("--switch-sigma", cov_switch, "Flip-flop policy switch threshold")
        ->capture_default_str();
    cov->add_flag("--exact", cov_exact, "Exact outcome sum instead of toys");

    // ---- systematics ----
    auto* sysc = app.add_subcommand(
        "systematics", "Unisim (one-factor-at-a-time) vs multisim (jointly sampled) "
                       "systematic spread of a linear response");
    std::string sys_coeffs, sys_cov, sys_center;
    std::int64_t sys_draws = 10000;
    sysc->add_option("--coeffs", sys_coeffs, "Linear response coefficients c1,c2,...")
        ->required();
    sysc->add_option("--cov", sys_cov, "Covariance matrix CSV file")->required();
    sysc->add_option("--center", sys_center, "Nominal nuisance point (default zeros)");
    sysc->add_option("--n-multisim", sys_draws, "Joint draws")->capture_default_str();

    // ---- combine ----
    auto* comb = app.add_subcommand(
        "combine", "Weighted average of measurements (value,sigma CSV); with --cov a "
                   "correlated combination. Discrepant inputs get the scale factor "
                   "sqrt(S/(N-1)) on the combined error");
    std::string comb_input, comb_cov;
    comb->add_option("--input", comb_input, "CSV with value,sigma[,label] rows")->required();
    comb->add_option("--cov", comb_cov, "Covariance matrix CSV (correlated combination)");

    // ---- blind / unblind ----
    auto* blind_cmd = app.add_subcommand(
        "blind", "Apply a secret key-derived offset to a value (hidden-offset blinding)");
    auto* unblind_cmd = app.add_subcommand("unblind", "Remove a key-derived blinding offset");
    double blind_value = 0.0, blind_binades = 8.0;
    std::string blind_key;
    for (auto* cmd : {blind_cmd, unblind_cmd}) {
        cmd->add_option("--value", blind_value, "Input value")->required();
        cmd->add_option("--key", blind_key, "Secret key string")->required();
        cmd->add_option("--binades", blind_binades, "Offset range (factors of two)")
            ->capture_default_str();
    }

    // ---- gof ----
    auto* gof = app.add_subcommand("gof", "Goodness of fit and hypothesis comparison");
    gof->require_subcommand(1);
    auto* gchi2 = gof->add_subcommand(
        "chi2", "Weighted sum of squares against a fixed prediction, with chi-square p-value");
    std::string gchi2_data, gchi2_pred;
    std::size_t gchi2_fitted = 0;
    gchi2->add_option("--data", gchi2_data, "Binned data CSV: x_lo,x_hi,count[,variance]")
        ->required();
    gchi2->add_option("--pred", gchi2_pred, "Per-bin predictions, one per row")->required();
    gchi2->add_option("--n-fitted", gchi2_fitted, "Fitted parameter count")
        ->capture_default_str();

    auto* gdelta = gof->add_subcommand(
        "delta-chi2", "Chi-square difference between nested fits; p from Wilks asymptotics "
                      "or a Monte-Carlo null for boundary/unidentified cases");
    std::string gd_data, gd_model0 = "poly:1", gd_model1 = "poly:2", gd_regime = "wilks";
    std::size_t gd_kextra = 1;
    std::int64_t gd_toys = 999;
    gdelta->add_option("--data", gd_data, "Binned data CSV")->required();
    gdelta->add_option("--model0", gd_model0, "Restricted model: poly:DEG")
        ->capture_default_str();
    gdelta->add_option("--model1", gd_model1,
                       "Extended model: poly:DEG or peak:BGDEG,X0LO,X0HI,SIGLO,SIGHI")
        ->capture_default_str();
    gdelta->add_option("--k-extra", gd_kextra, "Extra parameter count")->capture_default_str();
    gdelta->add_option("--regime", gd_regime, "wilks | mc-null")->capture_default_str();
    gdelta->add_option("--n-toys", gd_toys, "Toys for mc-null")->capture_default_str();

    auto* genergy = gof->add_subcommand(
        "energy", "Binning-free two-sample energy test with permutation p-value");
    std::string ge_a, ge_b, ge_scales;
    double ge_eps = 0.0;
    std::int64_t ge_perm = 999;
    genergy->add_option("--a", ge_a, "Sample A CSV, one point per row")->required();
    genergy->add_option("--b", ge_b, "Sample B CSV, one point per row")->required();
    genergy->add_option("--scales", ge_scales, "Per-dimension metric scales s1,s2,...")
        ->required();
    genergy->add_option("--epsilon", ge_eps,
                        "Distance floor (0 = 1e-6 of the median pairwise distance)")
        ->capture_default_str();
    genergy->add_option("--n-perm", ge_perm, "Permutations")->capture_default_str();

    // Global flags (--seed, --out, ...) may follow the subcommand name.
    for (auto* sub : {limit, pv, clsc, sens, cov, sysc, comb, blind_cmd, unblind_cmd, gof}) {
        sub->fallthrough();
    }
    for (auto* sub : {gchi2, gdelta, genergy}) sub->fallthrough();

    try {
        std::vector<std::string> argv_rev(args.rbegin(), args.rend());
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    if (seed_opt->count() > 0) g.seed = seed_value;
    if (g.threads > 0) set_max_threads(g.threads);

    try {
        Emission em;
        json params;

        if (*limit) {
            const CountingModel model = !limit_model.empty()
                                            ? parse_model_file(limit_model)
                                            : CountingModel::exact(limit_b);
            const Observation obs = make_observation(model, limit_n, limit_subcounts);
            const IntervalResult iv =
                limit_interval(model, obs, limit_method_from_string(limit_method), limit_cl);
            params["method"] = limit_method;
            params["n"] = limit_n;
            params["cl"] = limit_cl;
            params["model"] = model_json(model);
            em.result["interval"] = interval_json(iv);
            em.table.header = {"method", "n", "cl", "lower", "upper", "empty"};
            em.table.rows.push_back({iv.method, std::to_string(limit_n), fmt6(limit_cl),
                                     iv.empty ? "" : fmt6(*iv.lower),
                                     iv.empty ? "" : fmt6(*iv.upper), iv.empty ? "1" : "0"});
        } else if (*pv) {
            PValueReport rep;
            if (pv_strategy.empty()) {
                if (pv_b < 0.0) throw DomainError("pvalue: give --b or --model + --strategy");
                rep = pvalue_counting(pv_n, pv_b);
                params["b"] = pv_b;
            } else {
                const CountingModel model = !pv_model.empty() ? parse_model_file(pv_model)
                                                              : CountingModel::exact(pv_b);
                const Observation obs = make_observation(model, pv_n, pv_subcounts);
                PValueNuisanceOptions opts;
                opts.gamma = pv_gamma;
                if (!pv_range.empty()) {
                    const auto r = parse_double_list(pv_range, "--range");
                    if (r.size() != 2) throw DomainError("--range needs exactly lo,hi");
                    opts.b_range = {r[0], r[1]};
                }
                rep = pvalue_nuisance(obs, model, nuisance_strategy_from_string(pv_strategy),
                                      opts);
                params["model"] = model_json(model);
                params["strategy"] = pv_strategy;
            }
            params["n"] = pv_n;
            em.result["p"] = rep.p;
            em.result["sigma_equiv"] = rep.sigma_equiv;
            em.result["sided"] = rep.sided;
            em.result["method"] = rep.method;
            em.table.header = {"p", "sigma_equiv"};
            em.table.add_row({rep.p, rep.sigma_equiv});
        } else if (*clsc) {
            params["n"] = cls_n;
            params["b"] = cls_b;
            if (cls_ul) {
                const double ul = cls_upper_limit(cls_n, cls_b, cls_cl);
                params["cl"] = cls_cl;
                em.result["cls_upper_limit"] = ul;
                em.table.header = {"cls_upper_limit", "cl"};
                em.table.add_row({ul, cls_cl});
            } else {
                if (cls_s < 0.0) throw DomainError("cls: give --s (or --ul)");
                const CLsResult r = cls_counting(cls_n, cls_b, cls_s);
                params["s"] = cls_s;
                em.result["cls"] = r.cls;
                em.result["p0"] = r.p0;
                em.result["one_minus_p1"] = r.one_minus_p1;
                em.result["excluded_at_5pct"] = r.excluded_at_5pct;
                em.table.header = {"cls", "p0", "one_minus_p1", "excluded_at_5pct"};
                em.table.add_row({r.cls, r.p0, r.one_minus_p1, r.excluded_at_5pct ? 1.0 : 0.0});
            }
        } else if (*sens) {
            const CountingModel model = !sens_model.empty()
                                            ? parse_model_file(sens_model)
                                            : CountingModel::exact(sens_b, sens_eff);
            params["model"] = model_json(model);
            params["mode"] = sens_mode;
            if (sens_mode == "punzi") {
                const SensitivityResult r = punzi_sensitivity(model, sens_alpha, sens_cl);
                params["alpha"] = sens_alpha;
                params["cl"] = sens_cl;
                em.result["t_crit"] = r.t_crit;
                em.result["alpha_actual"] = r.alpha_actual;
                em.result["s_min"] = r.s_min;
                em.table.header = {"t_crit", "alpha_requested", "alpha_actual", "cl", "s_min"};
                em.table.add_row({static_cast<double>(r.t_crit), r.alpha_requested,
                                  r.alpha_actual, r.cl, r.s_min});
            } else if (sens_mode == "median") {
                const std::uint64_t seed = ctx.require_seed();
                const double med = median_sensitivity(
                    model, limit_method_from_string(sens_method), sens_cl, sens_toys, seed);
                params["method"] = sens_method;
                params["cl"] = sens_cl;
                params["n_toys"] = sens_toys;
                em.result["median_upper_limit"] = med;
                em.table.header = {"median_upper_limit", "cl", "n_toys"};
                em.table.add_row({med, sens_cl, static_cast<double>(sens_toys)});
            } else {
                throw DomainError("sensitivity: --mode must be punzi or median");
            }
        } else if (*cov) {
            const CoverageMethod method = coverage_method_from_string(cov_method);
            ExperimentModel model = GaussianUnitModel{cov_switch};
            if (method != CoverageMethod::FlipFlop) {
                if (cov_model.empty()) {
                    throw DomainError("coverage: counting methods need --model");
                }
                model = parse_model_file(cov_model);
                params["model"] = model_json(std::get<CountingModel>(model));
            } else {
                params["switch_sigma"] = cov_switch;
            }
            const auto grid = make_grid(cov_smin, cov_smax, cov_ds);
            CoverageCurve curve;
            if (cov_exact) {
                curve = coverage_exact(method, model, grid, cov_cl);
            } else {
                curve = coverage_scan(method, model, grid, cov_cl, cov_toys,
                                      ctx.require_seed());
            }
            params["method"] = cov_method;
            params["cl"] = cov_cl;
            params["n_toys"] = curve.n_toys;
            params["exact"] = cov_exact;
            em.table.header = {"s_true", "coverage", "stderr", "n_toys"};
            json points = json::array();
            for (std::size_t i = 0; i < curve.s_true.size(); ++i) {
                em.table.add_row({curve.s_true[i], curve.coverage[i], curve.stderr_[i],
                                  static_cast<double>(curve.n_toys)});
                points.push_back({{"s_true", curve.s_true[i]},
                                  {"coverage", curve.coverage[i]},
                                  {"stderr", curve.stderr_[i]}});
            }
            em.result["curve"] = points;
            em.result["method"] = curve.method;
        } else if (*sysc) {
            const auto coeffs = parse_double_list(sys_coeffs, "--coeffs");
            const auto cov_rows = read_numeric_csv(sys_cov, coeffs.size());
            if (cov_rows.size() != coeffs.size()) {
                throw DomainError("systematics: covariance dimension mismatch");
            }
            std::vector<double> center(coeffs.size(), 0.0);
            if (!sys_center.empty()) {
                center = parse_double_list(sys_center, "--center");
                if (center.size() != coeffs.size()) {
                    throw DomainError("systematics: center dimension mismatch");
                }
            }
            const auto response = [coeffs](const std::vector<double>& nu) {
                double t = 0.0;
                for (std::size_t i = 0; i < coeffs.size(); ++i) t += coeffs[i] * nu[i];
                return t;
            };
            const SystematicsReport rep =
                systematics_compare(response, center, cov_rows, sys_draws, ctx.require_seed());
            params["coeffs"] = coeffs;
            params["n_multisim"] = sys_draws;
            em.result["unisim_shifts"] = rep.unisim_shifts;
            em.result["unisim_quadrature"] = rep.unisim_quadrature;
            em.result["multisim_spread"] = rep.multisim_spread;
            em.result["multisim_stderr"] = rep.multisim_stderr;
            em.table.header = {"unisim_quadrature", "multisim_spread", "multisim_stderr",
                               "n_multisim"};
            em.table.add_row({rep.unisim_quadrature, rep.multisim_spread, rep.multisim_stderr,
                              static_cast<double>(sys_draws)});
        } else if (*comb) {
            const auto rows = read_numeric_csv(comb_input, 2);
            CombinedResult r;
            if (comb_cov.empty()) {
                std::vector<Measurement> ms;
                for (const auto& row : rows) ms.push_back({row[0], row[1]});
                r = weighted_average(ms);
            } else {
                std::vector<double> values;
                for (const auto& row : rows) values.push_back(row[0]);
                const auto cov_rows = read_numeric_csv(comb_cov, values.size());
                r = correlated_average(MeasurementSet(values, cov_rows));
            }
            params["n_measurements"] = rows.size();
            params["correlated"] = !comb_cov.empty();
            em.result["a_best"] = r.a_best;
            em.result["sigma_best"] = r.sigma_best;
            em.result["s_min"] = r.s_min;
            em.result["scale_factor"] = r.scale_factor;
            em.result["scaled_sigma"] = r.scaled_sigma;
            em.result["outside_range"] = r.outside_range;
            em.table.header = {"a_best", "sigma_best", "s",
                               "scale_factor", "scaled_sigma", "outside_range"};
            em.table.add_row({r.a_best, r.sigma_best, r.s_min, r.scale_factor, r.scaled_sigma,
                              r.outside_range ? 1.0 : 0.0});
        } else if (*blind_cmd || *unblind_cmd) {
            const BlindConfig cfg{blind_binades};
            const double out_value = *blind_cmd ? blind_offset(blind_value, blind_key, cfg)
                                                : unblind(blind_value, blind_key, cfg);
            params["binades"] = blind_binades;
            em.result["value"] = out_value;
            em.table.header = {"value"};
            // Blinded values must round-trip exactly: print full precision.
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", out_value);
            em.table.rows.push_back({buf});
        } else if (*gchi2) {
            const BinnedData data = read_binned_csv(gchi2_data);
            const auto pred_rows = read_numeric_csv(gchi2_pred, 1);
            std::vector<double> pred;
            for (const auto& row : pred_rows) pred.push_back(row[0]);
            const Chi2Result r = chi2_binned(data, pred, gchi2_fitted);
            params["bins"] = data.bins();
            params["n_fitted"] = gchi2_fitted;
            em.result["s"] = r.s;
            em.result["ndof"] = r.ndof;
            em.result["p"] = r.p;
            em.result["low_count_caveat"] = r.low_count_caveat;
            em.table.header = {"s", "ndof", "p", "low_count_caveat"};
            em.table.add_row({r.s, r.ndof, r.p, r.low_count_caveat ? 1.0 : 0.0});
        } else if (*gdelta) {
            const BinnedData data = read_binned_csv(gd_data);
            const auto make_model = [](const std::string& spec) -> std::unique_ptr<FitModel> {
                if (spec.rfind("poly:", 0) == 0) {
                    return std::make_unique<PolynomialModel>(std::stoul(spec.substr(5)));
                }
                if (spec.rfind("peak:", 0) == 0) {
                    const auto v = parse_double_list(spec.substr(5), "peak spec");
                    if (v.size() != 5) {
                        throw DomainError("peak spec: BGDEG,X0LO,X0HI,SIGLO,SIGHI");
                    }
                    return std::make_unique<PeakModel>(static_cast<std::size_t>(v[0]), v[1],
                                                       v[2], v[3], v[4]);
                }
                throw DomainError("unknown model spec '" + spec + "'");
            };
            const auto m0 = make_model(gd_model0);
            const auto m1 = make_model(gd_model1);
            const DeltaChi2Regime regime = gd_regime == "wilks" ? DeltaChi2Regime::Wilks
                                           : gd_regime == "mc-null"
                                               ? DeltaChi2Regime::McNull
                                               : throw DomainError("regime: wilks | mc-null");
            const std::uint64_t seed =
                regime == DeltaChi2Regime::McNull ? ctx.require_seed() : 0;
            const DeltaChi2Result r =
                chi2_difference(data, *m0, *m1, gd_kextra, regime, gd_toys, seed);
            params["model0"] = gd_model0;
            params["model1"] = gd_model1;
            params["regime"] = gd_regime;
            params["k_extra"] = gd_kextra;
            em.result["chi2_restricted"] = r.chi2_restricted;
            em.result["chi2_extended"] = r.chi2_extended;
            em.result["delta_chi2"] = r.delta_chi2;
            em.result["p"] = r.p;
            em.result["sigma"] = r.sigma;
            em.table.header = {"chi2_restricted", "chi2_extended", "delta_chi2", "p", "sigma"};
            em.table.add_row({r.chi2_restricted, r.chi2_extended, r.delta_chi2, r.p, r.sigma});
        } else if (*genergy) {
            TwoSample ts;
            for (const auto& row : read_numeric_csv(ge_a, 1)) ts.a.push_back(row);
            for (const auto& row : read_numeric_csv(ge_b, 1)) ts.b.push_back(row);
            ts.scales = parse_double_list(ge_scales, "--scales");
            const std::uint64_t seed =
                ts.a.size() + ts.b.size() <= 12 ? 0 : ctx.require_seed();
            const EnergyResult r = energy_test(ts, ge_eps, ge_perm, seed);
            params["n_a"] = ts.a.size();
            params["n_b"] = ts.b.size();
            params["n_perm"] = r.n_perm;
            params["epsilon"] = r.epsilon;
            em.result["e"] = r.e;
            em.result["p"] = r.p;
            em.result["exhaustive"] = r.exhaustive;
            em.table.header = {"e", "p", "n_perm", "exhaustive"};
            em.table.add_row({r.e, r.p, static_cast<double>(r.n_perm),
                              r.exhaustive ? 1.0 : 0.0});
        }

        em.manifest = ctx.manifest(std::move(params));
        emit(em, g);
        return 0;
    } catch (const ComputationError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const DomainError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace cstk::cli
