#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "manipsim/cli.hpp"
#include "manipsim/pricing.hpp"
#include "manipsim/verify.hpp"

namespace py = pybind11;
using namespace manipsim;

namespace {

py::array_t<double> to_array(const std::vector<double>& v) {
    py::array_t<double> out(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), out.mutable_data());
    return out;
}

py::dict table_dict(const CoefficientTable& t) {
    py::dict d;
    d["t"] = to_array(t.grid().points());
    for (const auto& name : t.names()) d[py::str(name)] = to_array(t.column(name));
    return d;
}

py::dict estimate_dict(const MeanCI& m) {
    py::dict d;
    d["mean"] = m.mean;
    d["std_error"] = m.std_error;
    d["n"] = m.n;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Price-manipulation models: coefficients, simulation, pricing and verification";

    // ParamError derives from std::invalid_argument and surfaces as ValueError.
    py::register_exception<AdmissibilityError>(m, "AdmissibilityError", PyExc_RuntimeError);
    py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

    py::enum_<ModelKind>(m, "ModelKind")
        .value("Model1", ModelKind::Model1)
        .value("Model2", ModelKind::Model2)
        .value("Model3", ModelKind::Model3);

    py::enum_<Measure>(m, "Measure").value("P", Measure::P).value("Q", Measure::Q);

    py::class_<RawParams>(m, "RawParams")
        .def(py::init<>())
        .def_readwrite("s0", &RawParams::s0)
        .def_readwrite("a", &RawParams::a)
        .def_readwrite("g", &RawParams::g)
        .def_readwrite("kappa", &RawParams::kappa)
        .def_readwrite("sigma", &RawParams::sigma)
        .def_readwrite("T", &RawParams::T)
        .def_readwrite("mu", &RawParams::mu)
        .def_readwrite("lambda_", &RawParams::lambda)
        .def_readwrite("q0", &RawParams::q0)
        .def_readwrite("kind", &RawParams::kind);

    m.def("reference_params", [](int model, double lambda) { return reference_params(model_kind_from_int(model), lambda); },
          py::arg("model"), py::arg("lam") = 0.0);

    py::class_<ModelParams>(m, "Params")
        .def(py::init([](const RawParams& r) { return ModelParams::validate(r); }))
        .def_property_readonly("kind", &ModelParams::kind)
        .def_property_readonly("s0", &ModelParams::s0)
        .def_property_readonly("a", &ModelParams::a)
        .def_property_readonly("g", &ModelParams::g)
        .def_property_readonly("kappa", &ModelParams::kappa)
        .def_property_readonly("sigma", &ModelParams::sigma)
        .def_property_readonly("T", &ModelParams::T)
        .def_property_readonly("mu", &ModelParams::mu)
        .def_property_readonly("lambda_", &ModelParams::lambda)
        .def_property_readonly("q0", &ModelParams::q0)
        .def("with_lambda", [](const ModelParams& p, double l) { return p.with_lambda(l); })
        .def("with_q0", &ModelParams::with_q0);

    m.def("lambda_threshold", py::overload_cast<const ModelParams&>(&lambda_threshold));
    m.def("q_star", py::overload_cast<const ModelParams&>(&q_star));
    m.def("t_max", &t_max);

    m.def(
        "coefficients",
        [](const ModelParams& p, std::size_t n_steps) { return table_dict(build_coefficients(p, n_steps).table); },
        py::arg("params"), py::arg("n_steps") = kDefaultSteps, "Coefficient table as a dict of numpy columns.");

    m.def(
        "price",
        [](const ModelParams& p, std::size_t n_steps) {
            const auto c = build_coefficients(p, n_steps);
            const auto vf = value_functions(p, c);
            py::dict d;
            d["h0"] = price_h(p, c, 0.0, p.q0(), p.s0());
            d["h0_no_manip"] = h0_no_manip(p);
            d["v0"] = vf.v0;
            d["w0"] = vf.w0 ? py::cast(*vf.w0) : py::none();
            d["z0"] = Policy(p, c).row(0).z;
            return d;
        },
        py::arg("params"), py::arg("n_steps") = kDefaultSteps);

    m.def(
        "simulate",
        [](const ModelParams& p, std::size_t n_paths, std::size_t n_steps, std::uint64_t seed, Measure measure,
           unsigned threads) {
            const auto c = build_coefficients(p, n_steps);
            SimConfig cfg;
            cfg.n_paths = n_paths;
            cfg.n_steps = n_steps;
            cfg.seed = seed;
            cfg.measure = measure;
            cfg.threads = threads;
            cfg.record_moments = false;
            PathEnsemble e;
            {
                py::gil_scoped_release release;
                e = simulate(p, c, cfg);
            }
            py::dict d;
            d["h0"] = e.h0;
            for (auto f : {Functional::TerminalQ, Functional::TerminalSTilde, Functional::TerminalPayoff,
                           Functional::ProducerObjective, Functional::TraderObjective, Functional::HedgeResidual}) {
                d[py::str(std::string(to_string(f)))] = estimate_dict(estimate(f, e));
            }
            d["q_T"] = to_array(functional_samples(Functional::TerminalQ, e));
            d["h_T"] = to_array(functional_samples(Functional::TerminalPayoff, e));
            return d;
        },
        py::arg("params"), py::arg("n_paths") = 10000, py::arg("n_steps") = kDefaultSteps, py::arg("seed") = 0,
        py::arg("measure") = Measure::P, py::arg("threads") = 0);

    m.def(
        "hjb_residual",
        [](const ModelParams& p, std::size_t n_steps) {
            return hjb_residual(p, build_coefficients(p, n_steps), default_state_grid(p)).max_abs_residual;
        },
        py::arg("params"), py::arg("n_steps") = kDefaultSteps);

    m.def(
        "sweep",
        [](const ModelParams& base, const std::vector<double>& lambdas, std::size_t n_steps) {
            SweepOptions opt;
            opt.n_steps = n_steps;
            py::list out;
            for (const auto& r : sweep_lambda(base, lambdas, opt)) {
                py::dict d;
                d["lambda"] = r.lambda;
                d["ok"] = r.ok;
                d["reason"] = r.reason;
                d["h0"] = r.h0;
                d["h0_no_manip"] = r.h0_no_manip;
                d["v0"] = r.v0;
                d["w0"] = r.w0;
                d["z0"] = r.z0;
                out.append(d);
            }
            return out;
        },
        py::arg("base"), py::arg("lambdas"), py::arg("n_steps") = kDefaultSteps);

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a manipsim subcommand; returns (exit code, stdout, stderr).");

    m.attr("DEFAULT_STEPS") = kDefaultSteps;
}
