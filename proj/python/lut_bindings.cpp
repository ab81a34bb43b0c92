#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "lut/app.hpp"
#include "lut/checkpoint.hpp"
#include "lut/config.hpp"
#include "lut/ctc.hpp"
#include "lut/decode.hpp"
#include "lut/error.hpp"
#include "lut/metrics.hpp"
#include "lut/model.hpp"

namespace py = pybind11;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

lut::Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw lut::DimensionError("expected a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return lut::Tensor::matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const lut::Tensor& t) {
  Array out({static_cast<py::ssize_t>(t.rows()), static_cast<py::ssize_t>(t.cols())});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

// Runs one command, returning (exit status, printed log).
template <class F>
py::tuple run_command(F&& f) {
  std::ostringstream log;
  const int rc = f(log);
  return py::make_tuple(rc, log.str());
}

// Loaded model plus the vocabularies of its dataset.
class Translator {
 public:
  Translator(const lut::RunConfig& config, const std::string& checkpoint)
      : data_(lut::app::load_dataset(config)),
        model_(lut::app::load_model(config, data_, checkpoint)),
        config_(config) {}

  std::vector<std::string> translate(const Array& features, std::size_t beam) const {
    const lut::Tensor x = to_tensor(features);
    std::vector<int> ids;
    if (beam == 0) {
      ids = lut::greedy_translate(model_, x);
    } else {
      lut::BeamOptions o;
      o.beam = beam;
      o.length_penalty = config_.length_penalty;
      ids = lut::strip_eos(lut::beam_search(model_, x, o).tokens);
    }
    return data_.target.decode(ids);
  }

  std::vector<std::string> transcribe(const Array& features) const {
    const auto enc = model_.encode(to_tensor(features));
    return data_.source.decode(lut::ctc::greedy_decode(enc.ctc_log_probs));
  }

  py::dict encode(const Array& features) const {
    const auto enc = model_.encode(to_tensor(features));
    py::dict d;
    d["h_ae"] = to_array(enc.h_ae);
    d["h_se"] = to_array(enc.h_se);
    d["ctc_log_probs"] = to_array(enc.ctc_log_probs);
    return d;
  }

  py::list dev_features() const {
    py::list out;
    for (const auto& u : data_.dev) {
      py::dict d;
      d["utt_id"] = u.id;
      d["features"] = to_array(u.features);
      d["transcription"] = data_.source.decode(u.z);
      if (u.y) d["translation"] = data_.target.decode(*u.y);
      out.append(d);
    }
    return out;
  }

 private:
  lut::app::Dataset data_;
  lut::LutModel model_;
  lut::RunConfig config_;
};

}  // namespace

PYBIND11_MODULE(_lut, m) {
  m.doc() = "Bindings for the listen-understand-translate toolkit";

  auto base = py::register_exception<lut::Error>(m, "LutError", PyExc_RuntimeError);
  py::register_exception<lut::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<lut::HashMismatchError>(m, "HashMismatchError", base.ptr());
  py::register_exception<lut::InfeasibleAlignmentError>(m, "InfeasibleAlignmentError",
                                                        base.ptr());
  py::register_exception<lut::EmptyInputError>(m, "EmptyInputError", base.ptr());

  py::class_<lut::RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_static("parse", &lut::RunConfig::parse, py::arg("text"))
      .def_static("load", [](const std::string& p) { return lut::RunConfig::load(p); })
      .def_static("keys", &lut::RunConfig::keys)
      .def("set", &lut::RunConfig::set, py::arg("key"), py::arg("value"))
      .def("apply_seed", &lut::RunConfig::apply_seed, py::arg("seed"))
      .def("to_text", &lut::RunConfig::to_text)
      .def_property(
          "data_dir", [](const lut::RunConfig& c) { return c.data_dir.string(); },
          [](lut::RunConfig& c, const std::string& p) { c.data_dir = p; })
      .def_readonly("seed", &lut::RunConfig::seed);

  m.def(
      "ctc_loss",
      [](const Array& log_probs, const std::vector<int>& z) {
        return lut::ctc::ctc_loss(to_tensor(log_probs), z).item();
      },
      py::arg("log_probs"), py::arg("z"), "-log P(z|x) for log-normalized [T x C] rows");
  m.def(
      "ctc_brute_force",
      [](const Array& log_probs, const std::vector<int>& z) {
        return lut::ctc::ctc_brute_force(to_tensor(log_probs), z);
      },
      py::arg("log_probs"), py::arg("z"));
  m.def(
      "ctc_greedy_decode",
      [](const Array& log_probs) { return lut::ctc::greedy_decode(to_tensor(log_probs)); },
      py::arg("log_probs"));
  m.def(
      "collapse", [](const std::vector<int>& raw) { return lut::ctc::collapse(raw); },
      py::arg("raw"));

  m.def(
      "wer",
      [](const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
        return lut::wer(std::span<const std::string>(ref), std::span<const std::string>(hyp));
      },
      py::arg("reference"), py::arg("hypothesis"));
  m.def(
      "bleu",
      [](const std::vector<std::string>& refs, const std::vector<std::string>& hyps,
         bool character_level) {
        lut::BleuOptions o;
        o.character_level = character_level;
        return lut::bleu(refs, hyps, o);
      },
      py::arg("references"), py::arg("hypotheses"), py::arg("character_level") = false,
      "corpus BLEU in [0, 100] over raw sentences");
  m.def(
      "pearson",
      [](const std::vector<double>& x, const std::vector<double>& y) {
        return lut::pearson(x, y);
      },
      py::arg("x"), py::arg("y"));

  m.def(
      "gen_data",
      [](const lut::RunConfig& c, const std::string& out) {
        return run_command([&](std::ostream& log) { return lut::app::cmd_gen_data(c, out, log); });
      },
      py::arg("config"), py::arg("out"));
  m.def(
      "train_teacher",
      [](const lut::RunConfig& c, const std::string& out) {
        return run_command(
            [&](std::ostream& log) { return lut::app::cmd_train_teacher(c, out, log); });
      },
      py::arg("config"), py::arg("out"));
  m.def(
      "train",
      [](const lut::RunConfig& c, const std::string& out) {
        return run_command([&](std::ostream& log) { return lut::app::cmd_train(c, out, log); });
      },
      py::arg("config"), py::arg("out"));
  m.def(
      "decode",
      [](const lut::RunConfig& c, const std::string& ckpt, const std::string& manifest,
         const std::string& out) {
        return run_command([&](std::ostream& log) {
          return lut::app::cmd_decode(c, ckpt, manifest, out, log);
        });
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("manifest") = "", py::arg("out"));
  m.def(
      "evaluate",
      [](const lut::RunConfig& c, const std::string& ckpt, const std::string& manifest,
         const std::string& out) {
        return run_command([&](std::ostream& log) {
          return lut::app::cmd_evaluate(c, ckpt, manifest, out, log);
        });
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("manifest") = "", py::arg("out"));
  m.def(
      "probe",
      [](const lut::RunConfig& c, const std::string& ckpt, const std::string& task,
         const std::string& out) {
        return run_command([&](std::ostream& log) {
          return lut::app::cmd_probe(c, ckpt, lut::parse_probe_task(task), {}, out, log);
        });
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("task"), py::arg("out"));
  m.def(
      "sweep",
      [](const lut::RunConfig& c, const std::string& axis, const std::string& out) {
        return run_command([&](std::ostream& log) {
          return lut::app::cmd_sweep(c, lut::app::parse_sweep_axis(axis), out, log);
        });
      },
      py::arg("config"), py::arg("axis"), py::arg("out"));
  m.def(
      "export_attention",
      [](const lut::RunConfig& c, const std::string& ckpt, const std::string& utt_id) {
        const lut::Checkpoint att = lut::app::export_attention(c, ckpt, utt_id, {});
        py::dict d;
        for (const auto& t : att.tensors) d[py::str(t.name)] = to_array(t.tensor);
        return d;
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("utt_id"),
      "attention matrices of one utterance keyed by layer and head");

  py::class_<Translator>(m, "Translator")
      .def(py::init<const lut::RunConfig&, const std::string&>(), py::arg("config"),
           py::arg("checkpoint"))
      .def("translate", &Translator::translate, py::arg("features"), py::arg("beam") = 0,
           "target tokens; beam 0 decodes greedily")
      .def("transcribe", &Translator::transcribe, py::arg("features"))
      .def("encode", &Translator::encode, py::arg("features"))
      .def("dev_utterances", &Translator::dev_features);
}
