// Command-line front end: turning points, Stokes graphs, transition
// probabilities and parameter sweeps. Exit codes: 0 ok, 1 usage, 2 model or
// precondition error, 3 numerical failure, 4 unresolved Stokes degeneracy.

#include "CLI11.hpp"

#include "ewkb/connection.hpp"
#include "ewkb/graph_export.hpp"
#include "ewkb/model_io.hpp"
#include "ewkb/reference.hpp"

#include <atomic>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <unistd.h>

using namespace ewkb;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model selection shared by all commands.
struct ModelArgs {
    std::string path;
    std::string builtin;
    std::vector<std::string> params; // key=value
    std::optional<double> eta, epsilon;

    void add(CLI::App* c)
    {
        c->add_option("--model", path, "model file (JSON, see docs/FORMATS.md)");
        c->add_option("--builtin", builtin, "built-in model: nlzsm or lzsm3");
        c->add_option("--param", params, "built-in parameter key=value (repeatable)");
        c->add_option("--eta", eta, "override the adiabaticity parameter");
        c->add_option("--epsilon", epsilon, "override the loss parameter");
    }

    nlohmann::json document() const
    {
        if (path.empty() == builtin.empty())
            throw UsageError("give exactly one of --model and --builtin");
        nlohmann::json doc;
        if (!path.empty()) {
            if (!params.empty())
                throw UsageError("--param only applies to --builtin");
            std::ifstream in(path);
            if (!in)
                throw ModelError("cannot read model file '" + path + "'");
            std::stringstream ss;
            ss << in.rdbuf();
            try {
                doc = nlohmann::json::parse(ss.str());
            } catch (const nlohmann::json::parse_error& e) {
                throw ModelError(std::string("model file is not valid JSON: ") + e.what());
            }
        } else {
            doc["builtin"]["name"] = builtin;
            doc["builtin"]["params"] = nlohmann::json::object();
            for (const auto& kv : params) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos)
                    throw UsageError("--param expects key=value, got '" + kv + "'");
                double v;
                try {
                    std::size_t used = 0;
                    v = std::stod(kv.substr(eq + 1), &used);
                    if (used != kv.size() - eq - 1)
                        throw std::invalid_argument(kv);
                } catch (const std::exception&) {
                    throw UsageError("--param value is not a number: '" + kv + "'");
                }
                doc["builtin"]["params"][kv.substr(0, eq)] = v;
            }
        }
        if (eta)
            doc["eta"] = *eta;
        if (epsilon)
            doc["epsilon"] = *epsilon;
        return doc;
    }

    std::string source() const { return path.empty() ? "builtin:" + builtin : path; }
};

// shortest representation that reads back to the same double
std::string num(double x)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

void write_atomic(const std::string& path, const std::string& content)
{
    const std::string tmp = path + ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + path + "'");
        out << content;
        out.close();
        if (!out)
            throw std::runtime_error("write to '" + path + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

struct Manifest {
    json j;
    explicit Manifest(const std::string& command, const ModelArgs& ma, const ModelSpec& m)
    {
        j["command"] = command;
        j["model_source"] = ma.source();
        j["model"] = model_to_json(m);
        j["parameters"] = json::object();
        j["outputs"] = json::array();
        j["seedless"] = true;
    }
    template <class T>
    void param(const std::string& k, const T& v) { j["parameters"][k] = v; }
    void output(const std::string& p) { j["outputs"].push_back(p); }
    void write(const std::string& primary) { write_atomic(primary + ".manifest.json", j.dump(2) + "\n"); }
};

void warn(const std::string& w) { std::cerr << "warning: " << w << "\n"; }

int workers()
{
    if (const char* e = std::getenv("EWKB_WORKERS")) {
        const int n = std::atoi(e);
        if (n >= 1)
            return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------- commands

struct TurningPointsCmd {
    ModelArgs model;
    std::string output;
    std::optional<double> re_min, re_max, im_max;

    int run()
    {
        const ModelSpec m = model_from_json(model.document());
        const ModelSpec m0 = m.with_epsilon(0.0);
        std::ostringstream csv;
        csv << "pair_i,pair_j,re,im,order\n";
        int rows = 0;
        for (const auto& tp : find_all_turning_points(m0)) {
            const cplx z = tp.location;
            if ((re_min && z.real() < *re_min) || (re_max && z.real() > *re_max) ||
                (im_max && std::abs(z.imag()) > *im_max))
                continue;
            csv << tp.level_i + 1 << "," << tp.level_j + 1 << "," << num(z.real()) << "," << num(z.imag()) << ","
                << tp.order << "\n";
            ++rows;
        }
        write_atomic(output, csv.str());
        Manifest man("turning-points", model, m);
        if (re_min)
            man.param("re_min", *re_min);
        if (re_max)
            man.param("re_max", *re_max);
        if (im_max)
            man.param("im_max", *im_max);
        man.output(output);
        man.write(output);
        std::cout << rows << " turning points written to " << output << "\n";
        return 0;
    }
};

struct StokesCmd {
    ModelArgs model;
    std::string csv_path, svg_path;
    bool auto_epsilon = false;
    double epsilon_sign = 1;
    double half_width = 0;

    int run()
    {
        if (csv_path.empty() && svg_path.empty())
            throw UsageError("give --csv and/or --svg");
        if (epsilon_sign != 1 && epsilon_sign != -1)
            throw UsageError("--epsilon-sign must be 1 or -1");
        const ModelSpec m = model_from_json(model.document());
        GraphOptions go;
        go.auto_epsilon = auto_epsilon;
        go.epsilon_sign = epsilon_sign;
        const StokesGraph g = build_graph(m, go);
        Manifest man("stokes-graph", model, m);
        man.param("auto_epsilon", auto_epsilon);
        man.param("epsilon_sign", epsilon_sign);
        man.param("epsilon_used", g.epsilon_used);
        man.param("half_width", half_width);
        if (!csv_path.empty()) {
            write_atomic(csv_path, graph_to_csv(g));
            man.output(csv_path);
        }
        if (!svg_path.empty()) {
            write_atomic(svg_path, graph_to_svg(g, half_width));
            man.output(svg_path);
        }
        json crossings = json::array();
        std::ostringstream line;
        const auto cs = g.ordered_crossings();
        line << g.lines.size() << " Stokes lines, " << cs.size() << " crossings";
        for (const auto& c : cs) {
            const StokesLine& l = g.lines[c.line];
            crossings.push_back({{"x", c.x}, {"line", c.line}, {"dominant", l.dominant + 1},
                                 {"subdominant", l.subdominant + 1}});
            line << (crossings.size() == 1 ? ": " : ", ") << num(c.x) << " (" << l.dominant + 1 << ">"
                 << l.subdominant + 1 << ")";
        }
        man.j["crossings"] = crossings;
        if (!g.degenerate() && !g.virtual_points.empty()) {
            warn(std::to_string(g.virtual_points.size()) +
                 " Stokes-line intersection(s) (virtual turning points, not connected)");
            for (std::size_t k = 0; k < std::min<std::size_t>(3, g.virtual_points.size()); ++k) {
                const auto& v = g.virtual_points[k];
                warn("  lines " + std::to_string(v.line_a) + " and " + std::to_string(v.line_b) + " meet at " +
                     fmt_c(v.point));
            }
        }
        json vps = json::array();
        for (const auto& v : g.virtual_points)
            vps.push_back({{"line_a", v.line_a}, {"line_b", v.line_b}, {"re", v.point.real()}, {"im", v.point.imag()}});
        man.j["virtual_points"] = vps;
        if (g.escalated)
            warn("degenerate Stokes graph resolved with epsilon = " + num(g.epsilon_used));
        man.write(!csv_path.empty() ? csv_path : svg_path);
        std::cout << line.str() << "\n";
        if (g.degenerate()) {
            warn("degenerate Stokes graph");
            for (const auto& d : g.degeneracies)
                warn(d);
            return 4;
        }
        return 0;
    }
};

struct MethodArgs {
    int from = 2, to = 1;
    std::optional<double> t_ref, t0, t1;
    double rel_tol = 1e-10;
    double epsilon_sign = 1;

    void add(CLI::App* c)
    {
        c->add_option("--from", from, "initial level (1 = highest energy)")->check(CLI::PositiveNumber);
        c->add_option("--to", to, "final level")->check(CLI::PositiveNumber);
        c->add_option("--t-ref", t_ref, "reference time of the exponents (ewkb, ddp, gddp)");
        c->add_option("--t0", t0, "window start (ewkb crossings, numeric and perturbative integration)");
        c->add_option("--t1", t1, "window end");
        c->add_option("--rel-tol", rel_tol, "relative tolerance of the numeric integrator");
        c->add_option("--epsilon-sign", epsilon_sign, "sign of the loss used to resolve degenerate graphs");
    }

    void record(Manifest& man) const
    {
        man.param("from", from);
        man.param("to", to);
        man.param("t_ref", t_ref ? json(*t_ref) : json(nullptr));
        man.param("t0", t0 ? json(*t0) : json(nullptr));
        man.param("t1", t1 ? json(*t1) : json(nullptr));
        man.param("rel_tol", rel_tol);
        man.param("epsilon_sign", epsilon_sign);
    }
};

TransitionReport compute(const std::string& method, const ModelSpec& m, const MethodArgs& a)
{
    const int from = a.from - 1, to = a.to - 1;
    if (from >= m.dimension || to >= m.dimension)
        throw PreconditionError("level index exceeds the model dimension " + std::to_string(m.dimension));
    if (a.t0 && a.t1 && !(*a.t0 < *a.t1))
        throw UsageError("--t0 must be below --t1");
    const double t_ref = a.t_ref.value_or(a.t0.value_or(0.0));
    auto two_level = [&](const char* name) {
        if (m.dimension != 2)
            throw PreconditionError(std::string(name) + " applies to two-level models only");
        if (!((from == 1 && to == 0) || (from == 0 && to == 1)))
            throw PreconditionError(std::string(name) + " gives the transition between levels 1 and 2 only");
    };
    TransitionReport r;
    r.eta = m.eta;
    r.from_level = a.from;
    r.to_level = a.to;
    if (method == "ewkb") {
        EwkbOptions o;
        o.t_ref = a.t_ref ? a.t_ref : a.t0;
        if (a.t0)
            o.t_begin = *a.t0;
        if (a.t1)
            o.t_end = *a.t1;
        o.graph.epsilon_sign = a.epsilon_sign;
        return transition_probability_ewkb(m, from, to, o);
    } else if (method == "ddp") {
        two_level("ddp");
        r.method = "ddp";
        r.set_probability(ddp_probability(m, t_ref));
    } else if (method == "gddp") {
        two_level("gddp");
        r.method = "gddp";
        r.set_probability(gddp_probability(m, t_ref));
    } else if (method == "perturbative") {
        two_level("perturbative");
        r.method = "perturbative";
        const ModelSpec m0 = m.with_epsilon(0.0);
        Window w;
        if (a.t0 && a.t1)
            w = {*a.t0, *a.t1};
        else
            w = default_window(m0, m.eta, SolverConfig{}, BranchAtlas(m0).locations());
        const cplx c = perturbative_amplitude(m0, w.t0, w.t1, std::max(a.rel_tol, 1e-12));
        r.amplitude = c;
        r.set_probability(std::norm(c));
        r.diagnostics["t0"] = w.t0;
        r.diagnostics["t1"] = w.t1;
    } else if (method == "numeric") {
        const ModelSpec m0 = m.with_epsilon(0.0);
        SolverConfig cfg;
        cfg.rel_tol = a.rel_tol;
        cfg.abs_tol = std::min(a.rel_tol * 1e-2, 1e-3);
        if (a.t0 || a.t1) {
            if (!(a.t0 && a.t1))
                throw UsageError("numeric needs both --t0 and --t1 (or neither)");
            cfg.t0 = a.t0;
            cfg.t1 = a.t1;
        }
        return numeric_transition_probability(m0, m.eta, from, to, cfg, BranchAtlas(m0).locations());
    } else {
        throw UsageError("unknown method '" + method + "'");
    }
    return r;
}

struct TransitionCmd {
    ModelArgs model;
    MethodArgs args;
    std::string method = "ewkb";
    std::string output;

    int run()
    {
        const ModelSpec m = model_from_json(model.document());
        const TransitionReport r = compute(method, m, args);
        for (const auto& w : r.warnings)
            warn(w);
        write_atomic(output, to_json(r).dump(2) + "\n");
        Manifest man("transition", model, m);
        man.param("method", method);
        args.record(man);
        man.output(output);
        man.write(output);
        std::cout << method << " P(" << args.from << "->" << args.to << ") = " << num(r.probability) << " at eta "
                  << num(m.eta) << "\n";
        return 0;
    }
};

struct SweepCmd {
    ModelArgs model;
    MethodArgs args;
    std::string vary;
    std::vector<std::string> methods{"ewkb", "numeric"};
    std::string output;

    int run()
    {
        const auto eq = vary.find('=');
        std::string name;
        double lo = 0, hi = 0;
        long steps = 0;
        {
            if (eq == std::string::npos)
                throw UsageError("--vary expects name=lo:hi:steps");
            name = vary.substr(0, eq);
            std::string rest = vary.substr(eq + 1);
            std::replace(rest.begin(), rest.end(), ':', ' ');
            std::istringstream is(rest);
            std::string extra;
            if (!(is >> lo >> hi >> steps) || (is >> extra))
                throw UsageError("--vary expects name=lo:hi:steps");
        }
        if (steps < 1)
            throw UsageError("--vary needs at least one step");
        for (const auto& me : methods)
            if (me != "ewkb" && me != "ddp" && me != "gddp" && me != "perturbative" && me != "numeric")
                throw UsageError("unknown method '" + me + "'");
        const nlohmann::json doc = model.document();
        const ModelSpec base = model_from_json(doc);
        with_parameter(doc, name, lo); // reject unknown parameter names early
        if (name != "eta" && name != "epsilon") {
            if (!doc["builtin"]["params"].contains(name)) {
                // validate through the built-in itself
                model_from_json(with_parameter(doc, name, lo));
            }
        }
        std::vector<double> values;
        for (long k = 0; k < steps; ++k)
            values.push_back(steps == 1 ? lo : lo + (hi - lo) * double(k) / double(steps - 1));

        struct Row {
            double probability = 0;
            std::optional<double> error_estimate;
            std::string error;
        };
        const std::size_t nm = methods.size();
        std::vector<Row> rows(values.size() * nm);
        std::atomic<std::size_t> next{0};
        std::mutex warn_mu;
        auto worker = [&] {
            for (std::size_t i; (i = next++) < values.size();) {
                ModelSpec m;
                try {
                    m = model_from_json(with_parameter(doc, name, values[i]));
                } catch (const std::exception& e) {
                    for (std::size_t k = 0; k < nm; ++k)
                        rows[i * nm + k].error = e.what();
                    continue;
                }
                for (std::size_t k = 0; k < nm; ++k) {
                    Row& row = rows[i * nm + k];
                    try {
                        const TransitionReport r = compute(methods[k], m, args);
                        row.probability = r.probability;
                        row.error_estimate = r.error_estimate;
                        std::lock_guard<std::mutex> lock(warn_mu);
                        for (const auto& w : r.warnings)
                            warn(name + "=" + num(values[i]) + " " + methods[k] + ": " + w);
                    } catch (const UsageError&) {
                        throw;
                    } catch (const std::exception& e) {
                        row.error = e.what();
                    }
                }
            }
        };
        const int nw = std::min<int>(workers(), static_cast<int>(values.size()));
        std::vector<std::thread> pool;
        for (int w = 1; w < nw; ++w)
            pool.emplace_back(worker);
        worker();
        for (auto& t : pool)
            t.join();

        std::ostringstream csv;
        csv << "parameter,value,method,probability,error_estimate,error\n";
        int failed = 0;
        for (std::size_t i = 0; i < values.size(); ++i)
            for (std::size_t k = 0; k < nm; ++k) {
                const Row& r = rows[i * nm + k];
                std::string err = r.error;
                std::replace(err.begin(), err.end(), ',', ';');
                std::replace(err.begin(), err.end(), '\n', ' ');
                csv << name << "," << num(values[i]) << "," << methods[k] << ","
                    << (r.error.empty() ? num(r.probability) : "") << ","
                    << (r.error_estimate ? num(*r.error_estimate) : "") << "," << err << "\n";
                failed += !r.error.empty();
            }
        write_atomic(output, csv.str());
        Manifest man("sweep", model, base);
        man.param("vary", name);
        man.param("lo", lo);
        man.param("hi", hi);
        man.param("steps", steps);
        man.param("methods", methods);
        args.record(man);
        man.output(output);
        man.write(output);
        if (failed)
            warn(std::to_string(failed) + " sweep point(s) failed; see the error column");
        std::cout << values.size() << " points x " << nm << " methods written to " << output << "\n";
        return 0;
    }
};

struct TrajectoryCmd {
    ModelArgs model;
    int from = 2;
    double t0 = -10, t1 = 10;
    int samples = 201;
    double rel_tol = 1e-10;
    std::string output;

    int run()
    {
        const ModelSpec m = model_from_json(model.document()).with_epsilon(0.0);
        if (!(t0 < t1) || samples < 2)
            throw UsageError("need --t0 < --t1 and at least two samples");
        if (from > m.dimension)
            throw PreconditionError("level index exceeds the model dimension");
        const EigenFrame f = real_axis_frame(m, t0);
        State psi0(m.dimension);
        for (int k = 0; k < m.dimension; ++k)
            psi0[k] = f.right(k, from - 1);
        std::vector<double> times;
        for (int k = 0; k < samples; ++k)
            times.push_back(t0 + (t1 - t0) * k / (samples - 1));
        SolverConfig cfg;
        cfg.rel_tol = rel_tol;
        cfg.abs_tol = std::min(rel_tol * 1e-2, 1e-3);
        const Trajectory tr = integrate(m, m.eta, cfg, psi0, times);
        write_atomic(output, trajectory_to_csv(m, tr));
        Manifest man("trajectory", model, m);
        man.param("from", from);
        man.param("t0", t0);
        man.param("t1", t1);
        man.param("samples", samples);
        man.param("rel_tol", rel_tol);
        man.param("norm_drift", tr.norm_drift);
        man.output(output);
        man.write(output);
        if (tr.norm_drift > 10 * rel_tol)
            warn("norm drift " + num(tr.norm_drift) + " exceeds 10 x rel_tol");
        std::cout << samples << " samples written to " << output << ", norm drift " << num(tr.norm_drift) << "\n";
        return 0;
    }
};

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Exact-WKB transition probabilities for swept discrete-level systems"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 usage, 2 model/precondition, 3 numerical, 4 degenerate Stokes graph.\n"
               "EWKB_WORKERS sets the number of sweep threads. File formats: docs/FORMATS.md.");

    TurningPointsCmd tp;
    auto* c_tp = app.add_subcommand("turning-points", "list turning points; CSV columns pair_i,pair_j,re,im,order");
    tp.model.add(c_tp);
    c_tp->add_option("--output", tp.output, "CSV file")->required();
    c_tp->add_option("--re-min", tp.re_min, "drop points with smaller real part");
    c_tp->add_option("--re-max", tp.re_max, "drop points with larger real part");
    c_tp->add_option("--im-max", tp.im_max, "drop points farther from the real axis");

    StokesCmd sg;
    auto* c_sg = app.add_subcommand(
        "stokes-graph", "trace Stokes lines; CSV columns line,tp_re,tp_im,level_i,level_j,dominant,re,im");
    sg.model.add(c_sg);
    c_sg->add_option("--csv", sg.csv_path, "polyline CSV");
    c_sg->add_option("--svg", sg.svg_path, "SVG drawing");
    c_sg->add_flag("--auto-epsilon", sg.auto_epsilon, "resolve degenerate graphs with epsilon 0.01, then 0.05");
    c_sg->add_option("--epsilon-sign", sg.epsilon_sign, "sign of the automatic epsilon (1 or -1)");
    c_sg->add_option("--half-width", sg.half_width, "half width of the SVG view (0: fit)");

    TransitionCmd tr;
    auto* c_tr = app.add_subcommand("transition", "transition probability report (JSON)");
    tr.model.add(c_tr);
    tr.args.add(c_tr);
    c_tr->add_option("--method", tr.method, "ewkb, ddp, gddp, perturbative or numeric")
        ->check(CLI::IsMember({"ewkb", "ddp", "gddp", "perturbative", "numeric"}));
    c_tr->add_option("--output", tr.output, "report file")->required();

    SweepCmd sw;
    auto* c_sw = app.add_subcommand(
        "sweep", "vary one parameter; CSV columns parameter,value,method,probability,error_estimate,error");
    sw.model.add(c_sw);
    sw.args.add(c_sw);
    c_sw->add_option("--vary", sw.vary, "name=lo:hi:steps (steps = number of points)")->required();
    c_sw->add_option("--methods", sw.methods, "comma separated methods")->delimiter(',');
    c_sw->add_option("--output", sw.output, "CSV file")->required();

    TrajectoryCmd tj;
    auto* c_tj = app.add_subcommand("trajectory", "state and adiabatic populations along the real axis (CSV)");
    tj.model.add(c_tj);
    c_tj->add_option("--from", tj.from, "initial level")->check(CLI::PositiveNumber);
    c_tj->add_option("--t0", tj.t0, "start time");
    c_tj->add_option("--t1", tj.t1, "end time");
    c_tj->add_option("--samples", tj.samples, "number of sample times");
    c_tj->add_option("--rel-tol", tj.rel_tol, "relative tolerance");
    c_tj->add_option("--output", tj.output, "CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_tp->parsed())
            return tp.run();
        if (c_sg->parsed())
            return sg.run();
        if (c_tr->parsed())
            return tr.run();
        if (c_sw->parsed())
            return sw.run();
        if (c_tj->parsed())
            return tj.run();
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 2;
    } catch (const PreconditionError& e) {
        std::cerr << "precondition failed: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const DegeneracyError& e) {
        std::cerr << "degenerate Stokes graph: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
