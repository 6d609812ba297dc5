#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "sgs/baselines.hpp"
#include "sgs/cascade.hpp"
#include "sgs/cli.hpp"
#include "sgs/errors.hpp"
#include "sgs/evaluation.hpp"
#include "sgs/pairing.hpp"
#include "sgs/runner.hpp"
#include "sgs/scoring.hpp"

namespace py = pybind11;
using namespace sgs;

namespace {

py::array_t<float> to_array(const ImageTensor& t) {
    py::array_t<float> a({t.height, t.width, ImageTensor::kChannels});
    std::copy(t.rgb.begin(), t.rgb.end(), a.mutable_data());
    return a;
}

std::vector<double> to_vector(const py::object& o) {
    return py::cast<std::vector<double>>(o);
}

// Registered callables can outlive the interpreter (the registry is a static);
// after finalization the reference is leaked instead of decremented.
void drop(py::function& f) {
    if (Py_IsInitialized()) {
        py::gil_scoped_acquire gil;
        f = py::function();
    } else {
        f.release();
    }
}

// Python callables behind the backend interfaces. Every call takes the GIL.
class PyCaptioner final : public Captioner {
public:
    explicit PyCaptioner(py::function f) : f_(std::move(f)) {}
    ~PyCaptioner() override {
        drop(f_);
    }
    Caption caption(const ImageTensor& image, int max_tokens) override {
        py::gil_scoped_acquire gil;
        Caption c;
        c.text = py::cast<std::string>(f_(to_array(image), max_tokens));
        c.token_budget = max_tokens;
        std::istringstream words(c.text);
        for (std::string w; words >> w;) ++c.token_count;
        c.token_unit = "word";
        c.source_backend = "python";
        return c;
    }

private:
    py::function f_;
};

class PyEncoder final : public SentenceEncoder {
public:
    explicit PyEncoder(py::function f) : f_(std::move(f)) {}
    ~PyEncoder() override {
        drop(f_);
    }
    Embedding embed(const std::string& text) override {
        py::gil_scoped_acquire gil;
        return {to_vector(f_(text))};
    }

private:
    py::function f_;
};

class PyJointEncoder final : public JointEncoder {
public:
    PyJointEncoder(py::function image, py::function text) : image_(std::move(image)), text_(std::move(text)) {}
    ~PyJointEncoder() override {
        drop(image_);
        drop(text_);
    }
    Embedding embed_image(const ImageTensor& image) override {
        py::gil_scoped_acquire gil;
        return {to_vector(image_(to_array(image)))};
    }
    Embedding embed_text(const std::string& text) override {
        py::gil_scoped_acquire gil;
        return {to_vector(text_(text))};
    }

private:
    py::function image_, text_;
};

class PyVisionEncoder final : public VisionEncoder {
public:
    explicit PyVisionEncoder(py::function f) : f_(std::move(f)) {}
    ~PyVisionEncoder() override {
        drop(f_);
    }
    Embedding embed(const ImageTensor& image) override {
        py::gil_scoped_acquire gil;
        return {to_vector(f_(to_array(image)))};
    }

private:
    py::function f_;
};

class PyVlm final : public VlmAnswerer {
public:
    explicit PyVlm(py::function f) : f_(std::move(f)) {}
    ~PyVlm() override {
        drop(f_);
    }
    std::string answer(const ImageTensor& fg, const ImageTensor& bg, const std::string& prompt) override {
        py::gil_scoped_acquire gil;
        return py::cast<std::string>(f_(to_array(fg), to_array(bg), prompt));
    }

private:
    py::function f_;
};

class PyDownstream final : public DownstreamClient {
public:
    explicit PyDownstream(py::function f) : f_(std::move(f)) {}
    ~PyDownstream() override { drop(f_); }
    DownstreamResult submit(const ScoredPair& pair, RouteAction action) override {
        py::gil_scoped_acquire gil;
        py::object r = f_(pair, std::string(to_string(action)));
        DownstreamResult out;
        if (r.is_none()) return out;
        if (py::isinstance<py::float_>(r) || py::isinstance<py::int_>(r)) {
            const double s = py::cast<double>(r);
            if (s >= 0.0 && s <= 1.0) out.score = s;
            return out;
        }
        const auto status = py::cast<std::string>(r);
        if (status == "timeout") out.status = DownstreamResult::Status::Timeout;
        else if (status != "ok") out.status = DownstreamResult::Status::Error;
        out.message = status;
        return out;
    }

private:
    py::function f_;
};

SdFormula parse_sd(const std::string& s) {
    if (s == "sample") return SdFormula::Sample;
    if (s == "population") return SdFormula::Population;
    throw InvalidInput("sd must be 'sample' or 'population'");
}

MismatchPolicy parse_policy(const std::string& s) {
    if (s == "skip_on_mismatch") return MismatchPolicy::SkipOnMismatch;
    if (s == "forward_on_mismatch") return MismatchPolicy::ForwardOnMismatch;
    throw InvalidInput("policy must be 'skip_on_mismatch' or 'forward_on_mismatch'");
}

py::dict stats_dict(const ScoreStats& s) {
    py::dict d;
    d["mean"] = s.mean;
    d["sd"] = s.sd;
    d["median"] = s.median;
    return d;
}

py::dict metrics_dict(const MetricsReport& m) {
    py::dict d;
    d["n"] = m.n;
    d["n_flagged"] = m.n_flagged;
    d["frac_flagged"] = m.frac_flagged;
    d["acc"] = m.acc;
    d["precision"] = m.precision;
    d["recall"] = m.recall;
    d["f1"] = m.f1;
    d["score"] = m.score ? py::object(stats_dict(*m.score)) : py::none();
    return d;
}

BackendConfig make_config(const std::string& captioner, const std::string& encoder,
                          std::optional<std::string> joint, std::optional<std::string> vision,
                          std::optional<std::string> vlm, int max_tokens, std::uint64_t seed,
                          std::vector<std::string> helper) {
    BackendConfig c;
    c.captioner_id = captioner;
    c.encoder_id = encoder;
    c.joint_encoder_id = std::move(joint);
    c.vision_encoder_id = std::move(vision);
    c.vlm_id = std::move(vlm);
    c.max_tokens = max_tokens;
    c.seed = seed;
    c.helper_command = std::move(helper);
    return c;
}

// Splits outcomes into (results, failures).
template <class T>
py::tuple split(BatchResult<T>&& b) {
    return py::make_tuple(std::move(b.ok), std::move(b.failures));
}

}  // namespace

PYBIND11_MODULE(_sgs, m) {
    m.doc() = "Foreground/background crop consistency scoring";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<InvalidInput>(m, "InvalidInput", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
    py::register_exception<DecodeError>(m, "DecodeError", base.ptr());
    py::register_exception<BackendUnavailable>(m, "BackendUnavailable", base.ptr());
    py::register_exception<DegenerateEmbedding>(m, "DegenerateEmbedding", base.ptr());
    py::register_exception<IoError>(m, "IoError", base.ptr());
    py::register_exception<PairingError>(m, "PairingError", base.ptr());

    m.attr("DEFAULT_TAU") = kDefaultTau;
    m.attr("DEFAULT_CAPTIONER") = kDefaultCaptioner;
    m.attr("DEFAULT_ENCODER") = kDefaultEncoder;
    m.attr("DEFAULT_MAX_TOKENS") = kDefaultMaxTokens;
    m.attr("SCORE_HEADER") = kScoreHeader;

    // --- scoring -----------------------------------------------------------
    m.def("normalize_score", &normalize_score, py::arg("s"));
    m.def("decide", [](double sts01, double tau) { return std::string(to_string(decide(sts01, tau))); },
          py::arg("sts01"), py::arg("tau") = kDefaultTau);
    m.def("cosine", [](const std::vector<double>& u, const std::vector<double>& v) { return cosine(u, v); },
          py::arg("u"), py::arg("v"));

    // --- pairing -----------------------------------------------------------
    py::class_<CropPair>(m, "CropPair")
        .def(py::init([](std::string id, fs::path fg, fs::path bg) { return CropPair{std::move(id), fg, bg}; }),
             py::arg("id"), py::arg("fg_path"), py::arg("bg_path"))
        .def_readwrite("id", &CropPair::id)
        .def_readwrite("fg_path", &CropPair::fg_path)
        .def_readwrite("bg_path", &CropPair::bg_path)
        .def(py::self == py::self)
        .def("__repr__", [](const CropPair& p) {
            return "CropPair('" + p.id + "', '" + p.fg_path.string() + "', '" + p.bg_path.string() + "')";
        });

    m.def("default_extensions", &default_extensions);
    m.def("load_pairs_csv", &load_pairs_csv, py::arg("manifest_path"));
    m.def("load_pairs_json", &load_pairs_json, py::arg("ids_path"), py::arg("fg_dir"), py::arg("bg_dir"),
          py::arg("extensions") = default_extensions());
    m.def(
        "autopair",
        [](const fs::path& fg, const fs::path& bg, const std::vector<std::string>& ext) {
            auto r = autopair(fg, bg, ext);
            return py::make_tuple(r.pairs, r.fg_only, r.bg_only);
        },
        py::arg("fg_dir"), py::arg("bg_dir"), py::arg("extensions") = default_extensions(),
        "Returns (pairs, fg_only_stems, bg_only_stems).");

    // --- backends ----------------------------------------------------------
    py::class_<Caption>(m, "Caption")
        .def_readonly("text", &Caption::text)
        .def_readonly("token_budget", &Caption::token_budget)
        .def_readonly("token_count", &Caption::token_count)
        .def_readonly("token_unit", &Caption::token_unit)
        .def_readonly("source_backend", &Caption::source_backend);

    py::class_<Backends>(m, "Backends")
        .def(py::init([](const std::string& captioner, const std::string& encoder, std::optional<std::string> joint,
                         std::optional<std::string> vision, std::optional<std::string> vlm, int max_tokens,
                         std::uint64_t seed, std::vector<std::string> helper) {
                 return std::make_unique<Backends>(
                     make_config(captioner, encoder, std::move(joint), std::move(vision), std::move(vlm),
                                 max_tokens, seed, std::move(helper)));
             }),
             py::arg("captioner") = kDefaultCaptioner, py::arg("encoder") = kDefaultEncoder,
             py::arg("joint_encoder") = py::none(), py::arg("vision_encoder") = py::none(),
             py::arg("vlm") = py::none(), py::arg("max_tokens") = kDefaultMaxTokens, py::arg("seed") = 0,
             py::arg("helper") = std::vector<std::string>{})
        .def(
            "caption", [](Backends& b, const fs::path& p) { return b.caption(load_image(p)); },
            py::arg("image_path"), py::call_guard<py::gil_scoped_release>())
        .def(
            "embed", [](Backends& b, const std::string& t) { return b.embed(t).values; }, py::arg("text"),
            py::call_guard<py::gil_scoped_release>());

    m.def("register_captioner", [](const std::string& id, py::function f) {
        auto impl = std::make_shared<PyCaptioner>(std::move(f));
        BackendRegistry::global().add_captioner(id, [impl](const BackendConfig&) { return impl; });
    }, py::arg("id"), py::arg("fn"), "fn(image: float32[448,448,3] in [0,1], max_tokens) -> str");
    m.def("register_encoder", [](const std::string& id, py::function f) {
        auto impl = std::make_shared<PyEncoder>(std::move(f));
        BackendRegistry::global().add_encoder(id, [impl](const BackendConfig&) { return impl; });
    }, py::arg("id"), py::arg("fn"), "fn(text) -> sequence of float");
    m.def("register_joint_encoder", [](const std::string& id, py::function image_fn, py::function text_fn) {
        auto impl = std::make_shared<PyJointEncoder>(std::move(image_fn), std::move(text_fn));
        BackendRegistry::global().add_joint_encoder(id, [impl](const BackendConfig&) { return impl; });
    }, py::arg("id"), py::arg("image_fn"), py::arg("text_fn"));
    m.def("register_vision_encoder", [](const std::string& id, py::function f) {
        auto impl = std::make_shared<PyVisionEncoder>(std::move(f));
        BackendRegistry::global().add_vision_encoder(id, [impl](const BackendConfig&) { return impl; });
    }, py::arg("id"), py::arg("fn"));
    m.def("register_vlm", [](const std::string& id, py::function f) {
        auto impl = std::make_shared<PyVlm>(std::move(f));
        BackendRegistry::global().add_vlm(id, [impl](const BackendConfig&) { return impl; });
    }, py::arg("id"), py::arg("fn"), "fn(fg_image, bg_image, prompt) -> str");

    // --- scoring runs ------------------------------------------------------
    py::class_<ScoredPair>(m, "ScoredPair")
        .def_readonly("id", &ScoredPair::id)
        .def_readonly("fg_path", &ScoredPair::fg_path)
        .def_readonly("bg_path", &ScoredPair::bg_path)
        .def_readonly("fg_text", &ScoredPair::fg_text)
        .def_readonly("bg_text", &ScoredPair::bg_text)
        .def_readonly("raw_cosine", &ScoredPair::raw_cosine)
        .def_readonly("sts01", &ScoredPair::sts01)
        .def_property_readonly("label", [](const ScoredPair& p) { return std::string(to_string(p.label)); })
        .def_readonly("tau", &ScoredPair::tau);

    py::class_<PairFailure>(m, "PairFailure")
        .def_readonly("id", &PairFailure::id)
        .def_property_readonly("stage", [](const PairFailure& f) { return std::string(to_string(f.stage)); })
        .def_readonly("message", &PairFailure::message)
        .def("__repr__", [](const PairFailure& f) {
            return "PairFailure('" + f.id + "', " + std::string(to_string(f.stage)) + ")";
        });

    m.def(
        "score_pairs",
        [](const std::vector<CropPair>& pairs, Backends& b, double tau, std::size_t jobs) {
            if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in [0,1]");
            BatchResult<ScoredPair> r;
            {
                py::gil_scoped_release release;
                r = score_batch(pairs, b, tau, jobs);
            }
            return split(std::move(r));
        },
        py::arg("pairs"), py::arg("backends"), py::arg("tau") = kDefaultTau, py::arg("jobs") = 1,
        "Returns (scored, failures).");
    m.def(
        "write_rows", [](const std::vector<ScoredPair>& rows, const fs::path& p) { write_rows(rows, p); },
        py::arg("rows"), py::arg("path"));
    m.def("read_rows", &read_rows, py::arg("path"), py::arg("tau") = kDefaultTau);

    // --- evaluation --------------------------------------------------------
    m.def("one_class_metrics", [](const std::vector<bool>& f) { return metrics_dict(one_class_metrics(f)); },
          py::arg("flagged"));
    m.def(
        "score_stats",
        [](const std::vector<double>& s, const std::string& sd) { return stats_dict(score_stats(s, parse_sd(sd))); },
        py::arg("scores"), py::arg("sd") = "sample");
    m.def(
        "threshold_sweep",
        [](const std::vector<double>& scores, const std::vector<double>& taus, const std::string& sd) {
            py::list out;
            for (const auto& p : threshold_sweep(scores, taus, parse_sd(sd))) {
                auto d = metrics_dict(p.metrics);
                d["tau"] = p.tau;
                out.append(d);
            }
            return out;
        },
        py::arg("scores"), py::arg("taus"), py::arg("sd") = "sample");
    m.def(
        "calibrate_tau",
        [](const std::vector<double>& scores, double target) {
            const auto c = calibrate_tau(scores, target);
            return py::make_tuple(c.tau, c.achieved_rate, c.reachable);
        },
        py::arg("scores"), py::arg("target_flag_rate"), "Returns (tau, achieved_rate, reachable).");
    m.def("round_half_even", &round_half_even, py::arg("x"), py::arg("decimals") = 3);

    // --- baselines ---------------------------------------------------------
    m.def("render_role_prompt", &render_role_prompt, py::arg("template") = kDefaultRoleTemplate,
          py::arg("role") = kDefaultRole);
    m.def(
        "gap_label",
        [](double s_fg, double s_bg) { return std::string(to_string(make_gap_result("", s_fg, s_bg).label)); },
        py::arg("s_fg"), py::arg("s_bg"));
    m.def(
        "unit_distance",
        [](const std::vector<double>& f, const std::vector<double>& b) { return unit_distance({f}, {b}); },
        py::arg("f"), py::arg("b"));
    m.def(
        "median_threshold",
        [](const std::vector<double>& distances) {
            std::vector<DistanceResult> rs;
            for (double d : distances) rs.push_back({"", d, std::nullopt});
            const auto m = median_threshold(std::move(rs));
            std::vector<std::string> labels;
            for (const auto& r : m.results) labels.emplace_back(to_string(*r.label));
            return py::make_tuple(m.median, labels);
        },
        py::arg("distances"), "Returns (median, labels).");
    m.def("map_yes_no", [](const std::string& a) { return std::string(to_string(map_yes_no(a))); },
          py::arg("answer"));

    // --- cascade -----------------------------------------------------------
    m.def("route",
          [](const ScoredPair& p, const std::string& policy) {
              return std::string(to_string(route(p, parse_policy(policy)).action));
          },
          py::arg("scored"), py::arg("policy") = "skip_on_mismatch");
    m.def("fuse", &fuse, py::arg("sts01"), py::arg("detector_score"), py::arg("weight") = 0.5);
    m.def(
        "run_cascade",
        [](const std::vector<ScoredPair>& pairs, const std::string& policy, std::optional<py::function> client,
           std::size_t max_in_flight) {
            std::unique_ptr<DownstreamClient> c;
            if (client) c = std::make_unique<PyDownstream>(*client);
            else c = std::make_unique<DisabledClient>();
            CascadeReport r;
            {
                py::gil_scoped_release release;
                r = run_cascade(pairs, parse_policy(policy), *c, max_in_flight);
            }
            py::list decisions;
            for (const auto& d : r.decisions) {
                py::dict x;
                x["id"] = d.id;
                x["action"] = std::string(to_string(d.action));
                x["label"] = std::string(to_string(d.sgs_label));
                x["sts01"] = d.sts01;
                x["downstream_status"] = d.downstream_status;
                x["detector_score"] = d.detector_score ? py::object(py::float_(*d.detector_score)) : py::none();
                decisions.append(x);
            }
            py::dict out;
            out["decisions"] = decisions;
            out["forwarded"] = r.forwarded;
            out["skipped"] = r.skipped;
            out["failed"] = r.failed;
            return out;
        },
        py::arg("pairs"), py::arg("policy") = "skip_on_mismatch", py::arg("client") = py::none(),
        py::arg("max_in_flight") = 1,
        "client(pair, action) returns None/'ok', a detector score, 'timeout' or an error string.");

    // --- command line --------------------------------------------------------
    m.def(
        "cli_main",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::main(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs the sgs-check command line in-process. Returns (exit_code, stdout, stderr).");
}
