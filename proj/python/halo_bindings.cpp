#include <sstream>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "halo/datasets.hpp"
#include "halo/directions.hpp"
#include "halo/error.hpp"
#include "halo/experiment.hpp"
#include "halo/intervention.hpp"
#include "halo/model.hpp"
#include "halo/probe.hpp"
#include "halo/selfcheck.hpp"
#include "halo/stats.hpp"
#include "halo/synthetic.hpp"

namespace py = pybind11;

namespace {

py::object to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

halo::QASample sample_from(const py::dict& d) {
  halo::QASample s;
  s.id = d["id"].cast<std::string>();
  s.question = d["question"].cast<std::string>();
  s.correct_answer = d["correct_answer"].cast<std::string>();
  s.hallucinated_answer = d["hallucinated_answer"].cast<std::string>();
  if (d.contains("knowledge") && !d["knowledge"].is_none()) {
    s.knowledge = d["knowledge"].cast<std::string>();
  }
  if (d.contains("adversarial") && !d["adversarial"].is_none()) {
    s.adversarial = d["adversarial"].cast<bool>();
  }
  return s;
}

py::dict sample_to(const halo::QASample& s) {
  py::dict d;
  d["id"] = s.id;
  d["question"] = s.question;
  d["correct_answer"] = s.correct_answer;
  d["hallucinated_answer"] = s.hallucinated_answer;
  d["knowledge"] = s.knowledge ? py::object(py::str(*s.knowledge)) : py::object(py::none());
  d["adversarial"] = s.adversarial ? py::object(py::bool_(*s.adversarial)) : py::object(py::none());
  return d;
}

std::vector<halo::QASample> samples_from(const py::list& items) {
  std::vector<halo::QASample> out;
  for (const auto& item : items) out.push_back(sample_from(item.cast<py::dict>()));
  return out;
}

halo::ProbeOptions probe_options(const std::string& strategy, bool knowledge,
                                 const std::string& anchor) {
  halo::ProbeOptions o;
  o.strategy.kind = halo::parse_prompt_kind(strategy);
  o.include_knowledge = knowledge;
  o.anchor = halo::parse_anchor(anchor);
  return o;
}

py::dict ttest_to(const halo::stats::TTestResult& r) {
  py::dict d;
  d["mean"] = r.mean;
  d["t"] = r.t_statistic;
  d["p"] = r.p_value;
  d["df"] = r.df;
  d["n"] = r.n;
  d["stars"] = halo::stats::significance_stars(r.p_value);
  return d;
}

class PyEngine {
 public:
  PyEngine(const std::string& model_dir, std::optional<std::string> tokenizer) {
    std::optional<std::filesystem::path> tok;
    if (tokenizer) tok = *tokenizer;
    engine_ = halo::load_engine(model_dir, tok);
  }

  const halo::Engine& engine() const { return engine_; }

  py::object config() const { return to_py(halo::to_json(engine_.config())); }

  halo::TokenSequence encode(const std::string& text) const {
    return engine_.tokenizer->encode(text);
  }
  std::string decode(const halo::TokenSequence& ids) const {
    return engine_.tokenizer->decode(ids);
  }

  // Returns (logits [rows x vocab], {(layer, pos): hidden state}).
  py::tuple forward(const halo::TokenSequence& tokens,
                    const std::vector<std::pair<int, int>>& capture,
                    const std::string& logits) const {
    halo::ForwardOptions o;
    for (auto [l, p] : capture) o.capture.insert({l, p});
    if (logits == "all") {
      o.logits = halo::LogitsMode::all;
    } else if (logits == "last") {
      o.logits = halo::LogitsMode::last;
    } else if (logits == "none") {
      o.logits = halo::LogitsMode::none;
    } else {
      throw halo::UsageError("logits must be 'all', 'last' or 'none'");
    }
    halo::ForwardResult r;
    {
      py::gil_scoped_release release;
      r = engine_.model->forward(tokens, o);
    }
    py::array_t<float> arr({r.logit_rows, r.vocab_size});
    std::copy(r.logits.begin(), r.logits.end(), arr.mutable_data());
    py::dict states;
    for (const auto& [key, state] : r.trace.states()) {
      states[py::make_tuple(key.layer, key.position)] = state.values;
    }
    return py::make_tuple(arr, states);
  }

  halo::TokenSequence generate(const halo::TokenSequence& prompt, int max_new_tokens,
                               std::optional<std::vector<float>> steering, float alpha,
                               std::optional<halo::TokenId> stop_token) const {
    std::optional<halo::SteeringSpec> spec;
    if (steering) spec = halo::SteeringSpec{*steering, alpha};
    py::gil_scoped_release release;
    return engine_.model->generate(prompt, max_new_tokens, spec, stop_token);
  }

 private:
  halo::Engine engine_;
};

}  // namespace

PYBIND11_MODULE(_halo, m) {
  m.doc() = "Hallucination-awareness probing for LLaMA-family models";
  m.attr("__version__") = HALO_VERSION;

  // Translators run newest-first, so the subclasses are registered last.
  auto base = py::register_exception<halo::Error>(m, "HaloError");
  py::register_exception<halo::UsageError>(m, "UsageError", base);
  py::register_exception<halo::DataError>(m, "DataError", base);
  py::register_exception<halo::ModelError>(m, "ModelError", base);

  m.def(
      "make_tiny_model",
      [](const std::string& out, std::uint64_t seed, int n_layers, int hidden_size, int n_heads,
         int vocab_size, int ffn_hidden, int max_seq_len, bool orthonormal_unembedding) {
        const auto config =
            halo::tiny_config(n_layers, hidden_size, n_heads, vocab_size, ffn_hidden, max_seq_len);
        auto tensors = halo::random_weights(config, seed);
        if (orthonormal_unembedding) halo::orthonormalize_unembedding(tensors, config);
        halo::save_model(out, config, tensors);
      },
      py::arg("out"), py::arg("seed") = 0, py::arg("n_layers") = 4, py::arg("hidden_size") = 64,
      py::arg("n_heads") = 4, py::arg("vocab_size") = 256, py::arg("ffn_hidden") = 128,
      py::arg("max_seq_len") = 512, py::arg("orthonormal_unembedding") = false,
      "Write a random-weight model directory.");

  py::class_<PyEngine>(m, "Engine")
      .def(py::init<const std::string&, std::optional<std::string>>(), py::arg("model_dir"),
           py::arg("tokenizer") = py::none())
      .def_property_readonly("config", &PyEngine::config)
      .def("encode", &PyEngine::encode, py::arg("text"))
      .def("decode", &PyEngine::decode, py::arg("ids"))
      .def("forward", &PyEngine::forward, py::arg("tokens"),
           py::arg("capture") = std::vector<std::pair<int, int>>{}, py::arg("logits") = "all")
      .def("generate", &PyEngine::generate, py::arg("prompt"), py::arg("max_new_tokens"),
           py::arg("steering") = py::none(), py::arg("alpha") = 100.0f,
           py::arg("stop_token") = py::none());

  m.def(
      "load_dataset",
      [](const std::string& path, const std::string& format, std::optional<std::string> category,
         std::optional<std::size_t> sample_n, std::uint64_t seed) {
        halo::DatasetSpec spec;
        spec.path = path;
        spec.format = halo::parse_dataset_format(format);
        if (category) spec.category_filter = halo::parse_category(*category);
        spec.sample_n = sample_n;
        spec.seed = seed;
        const auto loaded = halo::load_dataset(spec);
        py::list out;
        for (const auto& s : loaded.samples) out.append(sample_to(s));
        return py::make_tuple(out, loaded.rejected.size());
      },
      py::arg("path"), py::arg("format") = "generic_jsonl", py::arg("category") = py::none(),
      py::arg("sample_n") = py::none(), py::arg("seed") = 0,
      "Returns (samples, rejected_count).");

  m.def(
      "probe",
      [](const PyEngine& e, const py::list& samples, const std::string& strategy, bool knowledge,
         const std::string& anchor, int threads) {
        const auto qa = samples_from(samples);
        const auto opts = probe_options(strategy, knowledge, anchor);
        halo::ProbeRun run;
        {
          py::gil_scoped_release release;
          run = halo::run_probe(e.engine(), qa, opts, threads);
        }
        py::list records;
        for (const auto& r : run.records) {
          py::dict d;
          d["sample_id"] = r.sample_id;
          d["cos_halluc"] = r.cos_halluc;
          d["cos_corr"] = r.cos_corr;
          d["awareness"] = r.awareness;
          records.append(d);
        }
        py::list skipped;
        for (const auto& s : run.skipped) skipped.append(py::make_tuple(s.sample_id, s.reason));
        return py::make_tuple(records, skipped);
      },
      py::arg("engine"), py::arg("samples"), py::arg("strategy") = "none",
      py::arg("knowledge") = false, py::arg("anchor") = "answer_cue", py::arg("threads") = 1,
      "Awareness score per sample; returns (records, skipped).");

  m.def(
      "fit_directions",
      [](const PyEngine& e, const py::list& samples, const std::string& strategy, bool knowledge,
         int k) {
        const auto qa = samples_from(samples);
        const auto run = halo::run_probe(e.engine(), qa, probe_options(strategy, knowledge, "answer_cue"));
        const auto vectors = halo::transition_vectors(run.triples);
        const auto pair = halo::fit_directions(vectors);
        const auto& weights = e.engine().model->weights();
        auto top = [&](const std::vector<double>& d) {
          py::list l;
          for (const auto& v : halo::vocab_project(d, weights, k, e.engine().tokenizer.get())) {
            l.append(py::make_tuple(v.token_id, v.token, v.score));
          }
          return l;
        };
        py::dict out;
        out["d_corr"] = pair.d_corr;
        out["d_halluc"] = pair.d_halluc;
        out["explained_variance_corr"] = pair.explained_variance_corr;
        out["explained_variance_halluc"] = pair.explained_variance_halluc;
        out["top_corr"] = top(pair.d_corr);
        out["top_halluc"] = top(pair.d_halluc);
        return out;
      },
      py::arg("engine"), py::arg("samples"), py::arg("strategy") = "none",
      py::arg("knowledge") = false, py::arg("k") = 10,
      "First principal components of the correct and hallucinated transition vectors.");

  m.def(
      "effect_size",
      [](const PyEngine& e, const py::dict& sample, int layer_threshold,
         const std::string& strategy, bool knowledge) {
        const auto inputs = halo::build_inputs(sample_from(sample),
                                               probe_options(strategy, knowledge, "answer_cue"),
                                               *e.engine().tokenizer);
        const auto r = halo::effect_size(*e.engine().model, inputs, layer_threshold);
        return py::make_tuple(r.e_halluc, r.e_corr);
      },
      py::arg("engine"), py::arg("sample"), py::arg("layer_threshold"),
      py::arg("strategy") = "none", py::arg("knowledge") = false,
      "(e_halluc, e_corr) for one sample with the question blocked from the last token.");

  m.def(
      "steer",
      [](const PyEngine& e, const std::string& prompt, const std::vector<double>& direction,
         float alpha, int max_new_tokens) {
        const auto g = halo::steer_generate(e.engine(), prompt, direction, alpha, max_new_tokens);
        return py::make_tuple(py::bytes(g.original), py::bytes(g.adjusted));
      },
      py::arg("engine"), py::arg("prompt"), py::arg("direction"), py::arg("alpha") = 100.0f,
      py::arg("max_new_tokens") = 32, "Returns (original, adjusted) generations as bytes.");

  m.def("student_t_sf", &halo::stats::student_t_sf, py::arg("t"), py::arg("df"));
  m.def(
      "ttest_greater",
      [](const std::vector<double>& v, double null) {
        return ttest_to(halo::stats::one_tailed_ttest_greater(v, null));
      },
      py::arg("values"), py::arg("null") = 0.0);
  m.def(
      "mean_difference_test",
      [](const std::vector<double>& a, const std::vector<double>& b, bool paired) {
        return ttest_to(halo::stats::mean_difference_test(a, b, paired));
      },
      py::arg("a"), py::arg("b"), py::arg("paired") = true);
  m.def(
      "normality_screen",
      [](const std::vector<double>& v) {
        const auto s = halo::stats::normality_screen(v);
        return py::make_tuple(s.skewness, s.excess_kurtosis, s.pass);
      },
      py::arg("values"));
  m.def(
      "ols_simple",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        const auto r = halo::stats::ols_simple(x, y);
        py::dict d;
        d["slope"] = r.slope;
        d["intercept"] = r.intercept;
        d["slope_se"] = r.slope_se;
        d["intercept_se"] = r.intercept_se;
        d["slope_p"] = r.slope_p;
        d["intercept_p"] = r.intercept_p;
        d["r_squared"] = r.r_squared;
        d["adjusted_r_squared"] = r.adjusted_r_squared;
        d["f_statistic"] = r.f_statistic;
        d["residual_se"] = r.residual_se;
        d["n"] = r.n;
        return d;
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "run_command",
      [](const std::string& command, const py::dict& config) {
        const auto c = halo::experiment_from_json(from_py(config));
        std::ostringstream log;
        {
          py::gil_scoped_release release;
          if (command == "probe") {
            halo::cmd_probe(c, log);
          } else if (command == "directions") {
            halo::cmd_directions(c, log);
          } else if (command == "sweep") {
            halo::cmd_sweep(c, log);
          } else if (command == "steer") {
            halo::cmd_steer(c, log);
          } else {
            throw halo::UsageError("unknown command '" + command + "'");
          }
        }
        return log.str();
      },
      py::arg("command"), py::arg("config"),
      "Run probe/directions/sweep/steer with a config dict keyed like the CLI flags; "
      "returns the progress log.");

  m.def("selfcheck", [] {
    py::list out;
    for (const auto& r : halo::run_selfcheck()) out.append(py::make_tuple(r.name, r.passed, r.detail));
    return out;
  });
}
