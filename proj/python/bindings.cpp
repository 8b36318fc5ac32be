// pybind11 bindings exposing the core operations on NumPy arrays.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "maskbeam/beamform.hpp"
#include "maskbeam/checkpoint.hpp"
#include "maskbeam/gradcheck.hpp"
#include "maskbeam/metrics.hpp"
#include "maskbeam/sim.hpp"
#include "maskbeam/stft.hpp"

namespace py = pybind11;
using namespace maskbeam;

namespace {

using ComplexArray = py::array_t<std::complex<double>, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

StftConfig make_config(int fft_size, int hop, int sample_rate) {
  StftConfig cfg;
  cfg.fft_size = fft_size;
  cfg.hop = hop;
  cfg.sample_rate = sample_rate;
  cfg.validate();
  return cfg;
}

// (T,B) or (T,B,M) ndarray -> Spectrogram
Spectrogram spec_from_array(const ComplexArray& arr, const StftConfig& cfg, long num_samples) {
  const auto buf = arr.request();
  if (buf.ndim != 2 && buf.ndim != 3)
    throw ValidationError("spectrogram array must be 2-D (T,B) or 3-D (T,B,M)");
  Spectrogram spec;
  spec.config = cfg;
  spec.num_frames = static_cast<int>(buf.shape[0]);
  spec.num_bins = static_cast<int>(buf.shape[1]);
  spec.num_channels = buf.ndim == 3 ? static_cast<int>(buf.shape[2]) : 1;
  spec.num_samples = num_samples > 0 ? num_samples
                                     : static_cast<std::int64_t>(spec.num_frames - 1) * cfg.hop;
  if (spec.num_bins != cfg.num_bins())
    throw ValidationError("spectrogram bin count does not match fft_size/2+1");
  const auto* src = static_cast<const std::complex<double>*>(buf.ptr);
  spec.data.assign(src, src + static_cast<std::size_t>(buf.size));
  return spec;
}

ComplexArray spec_to_array(const Spectrogram& spec) {
  ComplexArray out;
  if (spec.num_channels == 1)
    out = ComplexArray({spec.num_frames, spec.num_bins});
  else
    out = ComplexArray({spec.num_frames, spec.num_bins, spec.num_channels});
  std::copy(spec.data.begin(), spec.data.end(),
            static_cast<std::complex<double>*>(out.request().ptr));
  return out;
}

MaskPlane mask_from_matrix(const Eigen::MatrixXd& values, MaskKind kind) {
  return {values, kind, MaskHardness::kSoft};
}

std::vector<Eigen::MatrixXcd> psd_from_array(const ComplexArray& arr) {
  const auto buf = arr.request();
  if (buf.ndim != 3 || buf.shape[1] != buf.shape[2])
    throw ValidationError("PSD array must be (B, M, M)");
  const int bins = static_cast<int>(buf.shape[0]);
  const int m = static_cast<int>(buf.shape[1]);
  const auto* src = static_cast<const std::complex<double>*>(buf.ptr);
  std::vector<Eigen::MatrixXcd> psd(bins, Eigen::MatrixXcd(m, m));
  for (int b = 0; b < bins; ++b)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        psd[b](i, j) = src[(static_cast<std::size_t>(b) * m + i) * m + j];
  return psd;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Time-frequency masking, GEV beamforming and enhancement metrics";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "stft",
      [](const DoubleArray& samples, int fft_size, int hop, int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        const auto buf = samples.request();
        if (buf.ndim == 1) {
          std::span<const double> s(static_cast<const double*>(buf.ptr),
                                    static_cast<std::size_t>(buf.shape[0]));
          return spec_to_array(stft(s, cfg));
        }
        if (buf.ndim == 2) {
          Eigen::MatrixXd channels(buf.shape[0], buf.shape[1]);
          const auto* src = static_cast<const double*>(buf.ptr);
          for (Eigen::Index c = 0; c < channels.rows(); ++c)
            for (Eigen::Index i = 0; i < channels.cols(); ++i)
              channels(c, i) = src[c * channels.cols() + i];
          return spec_to_array(stft(channels, cfg));
        }
        throw ValidationError("stft input must be 1-D (samples) or 2-D (channels, samples)");
      },
      py::arg("samples"), py::arg("fft_size") = 1024, py::arg("hop") = 256,
      py::arg("sample_rate") = 16000,
      "Complex STFT, (T,B) for one channel or (T,B,M) for multichannel input");

  m.def(
      "istft",
      [](const ComplexArray& spec, long length, int fft_size, int hop, int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        const auto out = istft(spec_from_array(spec, cfg, length));
        DoubleArray arr(static_cast<py::ssize_t>(out.size()));
        std::copy(out.begin(), out.end(), static_cast<double*>(arr.request().ptr));
        return arr;
      },
      py::arg("spec"), py::arg("length") = -1, py::arg("fft_size") = 1024, py::arg("hop") = 256,
      py::arg("sample_rate") = 16000, "Overlap-add synthesis of a single-channel STFT");

  m.def(
      "ideal_binary_masks",
      [](const ComplexArray& clean, const ComplexArray& noise, double speech_threshold,
         double noise_threshold, const std::string& domain, int fft_size, int hop,
         int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        IbmConfig ibm;
        ibm.speech_threshold = speech_threshold;
        ibm.noise_threshold = noise_threshold;
        ibm.domain = domain == "magnitude" ? MaskDomain::kMagnitude : MaskDomain::kPower;
        auto [x, n] = ideal_binary_masks(spec_from_array(clean, cfg, 0),
                                         spec_from_array(noise, cfg, 0), ibm);
        return py::make_tuple(x.values, n.values);
      },
      py::arg("clean_spec"), py::arg("noise_spec"), py::arg("speech_threshold") = 1.0,
      py::arg("noise_threshold") = 1.0, py::arg("domain") = "power", py::arg("fft_size") = 1024,
      py::arg("hop") = 256, py::arg("sample_rate") = 16000,
      "Binary speech/noise target masks from parallel clean/noise STFTs");

  m.def(
      "apply_mask",
      [](const Eigen::MatrixXd& mask, const ComplexArray& spec, int fft_size, int hop,
         int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        return spec_to_array(
            apply_mask(mask_from_matrix(mask, MaskKind::kSpeech), spec_from_array(spec, cfg, 0)));
      },
      py::arg("mask"), py::arg("spec"), py::arg("fft_size") = 1024, py::arg("hop") = 256,
      py::arg("sample_rate") = 16000);

  m.def(
      "median_fuse",
      [](const std::vector<Eigen::MatrixXd>& masks) {
        std::vector<MaskPlane> planes;
        planes.reserve(masks.size());
        for (const auto& v : masks) planes.push_back(mask_from_matrix(v, MaskKind::kSpeech));
        return median_fuse(planes).values;
      },
      py::arg("masks"), "Elementwise median across per-channel masks");

  m.def("normalize_features", &normalize_features, py::arg("magnitude"),
        "Per-utterance z-scored log(1+magnitude) features");

  m.def(
      "bce_loss",
      [](const Eigen::MatrixXd& target, const Eigen::MatrixXd& predicted) {
        return bce_loss(target, predicted);
      },
      py::arg("target"), py::arg("predicted"));

  m.def(
      "estimate_psd",
      [](const Eigen::MatrixXd& mask, const ComplexArray& spec, int fft_size, int hop,
         int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        const Spectrogram s = spec_from_array(spec, cfg, 0);
        const auto psd = estimate_psd(mask_from_matrix(mask, MaskKind::kSpeech), s);
        ComplexArray out({static_cast<int>(psd.size()), s.num_channels, s.num_channels});
        auto* dst = static_cast<std::complex<double>*>(out.request().ptr);
        for (std::size_t b = 0; b < psd.size(); ++b)
          for (int i = 0; i < s.num_channels; ++i)
            for (int j = 0; j < s.num_channels; ++j)
              dst[(b * s.num_channels + i) * s.num_channels + j] = psd[b](i, j);
        return out;
      },
      py::arg("mask"), py::arg("spec"), py::arg("fft_size") = 1024, py::arg("hop") = 256,
      py::arg("sample_rate") = 16000,
      "Mask-weighted PSD matrices, shape (B, M, M)");

  m.def(
      "condition_psd",
      [](const ComplexArray& psd, double eps) {
        auto mats = psd_from_array(psd);
        ComplexArray out(
            {static_cast<int>(mats.size()), static_cast<int>(mats[0].rows()),
             static_cast<int>(mats[0].cols())});
        auto* dst = static_cast<std::complex<double>*>(out.request().ptr);
        const int m = static_cast<int>(mats[0].rows());
        for (std::size_t b = 0; b < mats.size(); ++b) {
          const Eigen::MatrixXcd cond = condition_psd(mats[b], eps);
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) dst[(b * m + i) * m + j] = cond(i, j);
        }
        return out;
      },
      py::arg("psd"), py::arg("eps") = 1e-6, "Diagonal loading per bin");

  m.def(
      "gev_filter",
      [](const ComplexArray& phi_x, const ComplexArray& phi_n) {
        const auto x = psd_from_array(phi_x);
        const auto n = psd_from_array(phi_n);
        const BeamformerFilter filter = gev_filter(x, n, 0);
        const int bins = static_cast<int>(filter.taps.size());
        const int m = bins > 0 ? static_cast<int>(filter.taps[0].size()) : 0;
        ComplexArray taps({bins, m});
        DoubleArray lambdas(bins);
        auto* tp = static_cast<std::complex<double>*>(taps.request().ptr);
        auto* lp = static_cast<double*>(lambdas.request().ptr);
        for (int b = 0; b < bins; ++b) {
          lp[b] = filter.snr_eigenvalues[b];
          for (int i = 0; i < m; ++i) tp[static_cast<std::size_t>(b) * m + i] = filter.taps[b](i);
        }
        return py::make_tuple(taps, lambdas);
      },
      py::arg("phi_speech"), py::arg("phi_noise"),
      "Per-bin GEV filters and their SNR eigenvalues");

  m.def(
      "apply_beamformer",
      [](const ComplexArray& taps, const ComplexArray& spec, int fft_size, int hop,
         int sample_rate) {
        const StftConfig cfg = make_config(fft_size, hop, sample_rate);
        const Spectrogram s = spec_from_array(spec, cfg, 0);
        const auto buf = taps.request();
        if (buf.ndim != 2) throw ValidationError("taps must be (B, M)");
        BeamformerFilter filter;
        const auto* src = static_cast<const std::complex<double>*>(buf.ptr);
        const int bins = static_cast<int>(buf.shape[0]);
        const int m = static_cast<int>(buf.shape[1]);
        filter.taps.resize(bins);
        filter.snr_eigenvalues.assign(bins, 0.0);
        for (int b = 0; b < bins; ++b) {
          filter.taps[b].resize(m);
          for (int i = 0; i < m; ++i) filter.taps[b](i) = src[static_cast<std::size_t>(b) * m + i];
        }
        return spec_to_array(apply_beamformer(filter, s));
      },
      py::arg("taps"), py::arg("spec"), py::arg("fft_size") = 1024, py::arg("hop") = 256,
      py::arg("sample_rate") = 16000);

  m.def(
      "stoi",
      [](const DoubleArray& ref, const DoubleArray& deg, int rate) {
        const auto rb = ref.request(), db = deg.request();
        return stoi(std::span<const double>(static_cast<const double*>(rb.ptr),
                                            static_cast<std::size_t>(rb.size)),
                    std::span<const double>(static_cast<const double*>(db.ptr),
                                            static_cast<std::size_t>(db.size)),
                    rate);
      },
      py::arg("reference"), py::arg("degraded"), py::arg("sample_rate") = 16000);

  m.def(
      "estoi",
      [](const DoubleArray& ref, const DoubleArray& deg, int rate) {
        const auto rb = ref.request(), db = deg.request();
        return estoi(std::span<const double>(static_cast<const double*>(rb.ptr),
                                             static_cast<std::size_t>(rb.size)),
                     std::span<const double>(static_cast<const double*>(db.ptr),
                                             static_cast<std::size_t>(db.size)),
                     rate);
      },
      py::arg("reference"), py::arg("degraded"), py::arg("sample_rate") = 16000);

  m.def(
      "si_sdr",
      [](const DoubleArray& ref, const DoubleArray& deg) {
        const auto rb = ref.request(), db = deg.request();
        return si_sdr(std::span<const double>(static_cast<const double*>(rb.ptr),
                                              static_cast<std::size_t>(rb.size)),
                      std::span<const double>(static_cast<const double*>(db.ptr),
                                              static_cast<std::size_t>(db.size)));
      },
      py::arg("reference"), py::arg("degraded"));

  m.def(
      "synth_speech_like",
      [](std::uint64_t seed, std::int64_t length, int sample_rate) {
        const auto out = synth_speech_like(seed, length, sample_rate);
        DoubleArray arr(static_cast<py::ssize_t>(out.size()));
        std::copy(out.begin(), out.end(), static_cast<double*>(arr.request().ptr));
        return arr;
      },
      py::arg("seed"), py::arg("length"), py::arg("sample_rate") = 16000);

  m.def(
      "build_corpus",
      [](const std::string& config_json, const std::string& out_dir) {
        return build_corpus(sim_config_from_json(nlohmann::json::parse(config_json)), out_dir);
      },
      py::arg("config_json"), py::arg("out_dir"),
      "Generate a corpus from a SimConfig JSON string; returns the manifest path");

  m.def("grad_check_preset",
        [](const std::string& preset) { return grad_check_preset(preset).max_rel_err; },
        py::arg("preset") = "tiny");

  py::class_<Checkpoint>(m, "MaskNet")
      .def(py::init([](const std::string& path) {
             return new Checkpoint(load_checkpoint(path));
           }),
           py::arg("checkpoint_path"))
      .def_property_readonly("num_bins",
                             [](const Checkpoint& c) { return c.params.dims.num_bins; })
      .def_property_readonly("hidden", [](const Checkpoint& c) { return c.params.dims.hidden; })
      .def_property_readonly("heads",
                             [](const Checkpoint& c) {
                               std::vector<std::string> heads{"speech"};
                               if (c.params.dims.has_noise_head) heads.push_back("noise");
                               return heads;
                             })
      .def_property_readonly("epoch", [](const Checkpoint& c) { return c.meta.epoch; })
      .def(
          "forward",
          [](const Checkpoint& c, const Eigen::MatrixXd& features) {
            auto masks = forward(c.params, features);
            py::dict out;
            for (auto& [kind, plane] : masks)
              out[py::str(to_string(kind))] = plane.values;
            return out;
          },
          py::arg("features"), "Soft masks per head from normalized features")
      .def(
          "beamform",
          [](const Checkpoint& c, const DoubleArray& mix, int fft_size, int hop,
             int sample_rate) {
            const auto buf = mix.request();
            if (buf.ndim != 2) throw ValidationError("mix must be (channels, samples)");
            AudioClip clip;
            clip.sample_rate = sample_rate;
            clip.samples.resize(buf.shape[0], buf.shape[1]);
            const auto* src = static_cast<const double*>(buf.ptr);
            for (Eigen::Index ch = 0; ch < clip.samples.rows(); ++ch)
              for (Eigen::Index i = 0; i < clip.samples.cols(); ++i)
                clip.samples(ch, i) = src[ch * clip.samples.cols() + i];
            const auto result =
                beamform_utterance(clip, c.params, make_config(fft_size, hop, sample_rate));
            DoubleArray out(static_cast<py::ssize_t>(result.enhanced.size()));
            std::copy(result.enhanced.begin(), result.enhanced.end(),
                      static_cast<double*>(out.request().ptr));
            return out;
          },
          py::arg("mix"), py::arg("fft_size") = 1024, py::arg("hop") = 256,
          py::arg("sample_rate") = 16000,
          "Median-fused mask GEV beamforming of a multichannel mix");

  m.attr("__version__") = "0.1.0";
}
