#include "maskbeam/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "maskbeam/fft.hpp"
#include "maskbeam/stft.hpp"
#include "maskbeam/wav.hpp"

namespace maskbeam {

namespace sc = stoi_constants;

namespace {

struct BandLayout {
  std::vector<int> lo_bin, hi_bin;  // [lo, hi) FFT bin range per band
};

BandLayout band_layout() {
  BandLayout layout;
  const double bin_hz = static_cast<double>(sc::kSampleRate) / sc::kFftSize;
  for (int k = 0; k < sc::kNumBands; ++k) {
    const double fc = sc::kBandStartHz * std::pow(2.0, k / 3.0);
    const double lo = fc * std::pow(2.0, -1.0 / 6.0);
    const double hi = fc * std::pow(2.0, 1.0 / 6.0);
    int lo_bin = static_cast<int>(std::ceil(lo / bin_hz));
    int hi_bin = static_cast<int>(std::ceil(hi / bin_hz));
    lo_bin = std::max(lo_bin, 1);
    hi_bin = std::min(hi_bin, sc::kFftSize / 2 + 1);
    if (hi_bin <= lo_bin) hi_bin = lo_bin + 1;
    layout.lo_bin.push_back(lo_bin);
    layout.hi_bin.push_back(hi_bin);
  }
  return layout;
}

Eigen::MatrixXd frame_powers(std::span<const double> x, const std::vector<double>& window,
                             int num_frames) {
  Eigen::MatrixXd mags(sc::kFftSize / 2 + 1, num_frames);
  std::vector<std::complex<double>> buf(sc::kFftSize);
  for (int j = 0; j < num_frames; ++j) {
    const int start = j * sc::kHop;
    for (int i = 0; i < sc::kFrameLen; ++i) buf[i] = x[start + i] * window[i];
    fft_inplace(buf, false);
    for (int b = 0; b <= sc::kFftSize / 2; ++b) mags(b, j) = std::norm(buf[b]);
  }
  return mags;
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = da.norm() * db.norm();
  if (denom < 1e-20) return 0.0;
  return da.dot(db) / denom;
}

}  // namespace

StoiBands stoi_decompose(std::span<const double> reference, std::span<const double> degraded,
                         int sample_rate) {
  if (sample_rate != sc::kSampleRate)
    throw ValidationError("stoi: only 16 kHz input is supported (no resampler)");
  if (reference.size() != degraded.size())
    throw ValidationError("stoi: reference/degraded length mismatch");
  if (static_cast<int>(reference.size()) < sc::kMinSamples)
    throw ValidationError("stoi: input shorter than the " +
                          std::to_string(sc::kMinSamples) + "-sample analysis minimum");

  const int num_frames =
      static_cast<int>((reference.size() - sc::kFrameLen) / sc::kHop) + 1;
  const auto window = hann_window(sc::kFrameLen);

  // silent-frame removal, driven by the reference signal
  std::vector<double> energy_db(num_frames);
  double max_db = -1e300;
  for (int j = 0; j < num_frames; ++j) {
    double e = 0.0;
    const int start = j * sc::kHop;
    for (int i = 0; i < sc::kFrameLen; ++i) {
      const double v = reference[start + i] * window[i];
      e += v * v;
    }
    energy_db[j] = 10.0 * std::log10(e + 1e-300);
    max_db = std::max(max_db, energy_db[j]);
  }
  std::vector<int> kept;
  for (int j = 0; j < num_frames; ++j)
    if (energy_db[j] > max_db - sc::kSilenceRangeDb) kept.push_back(j);
  if (static_cast<int>(kept.size()) < sc::kSegmentFrames)
    throw ValidationError("stoi: fewer than one segment of frames after silence removal");

  const Eigen::MatrixXd ref_pow = frame_powers(reference, window, num_frames);
  const Eigen::MatrixXd deg_pow = frame_powers(degraded, window, num_frames);
  const BandLayout layout = band_layout();

  StoiBands bands;
  bands.ref.resize(sc::kNumBands, static_cast<Eigen::Index>(kept.size()));
  bands.deg.resize(sc::kNumBands, static_cast<Eigen::Index>(kept.size()));
  for (std::size_t jj = 0; jj < kept.size(); ++jj) {
    const int j = kept[jj];
    for (int k = 0; k < sc::kNumBands; ++k) {
      double er = 0.0, ed = 0.0;
      for (int b = layout.lo_bin[k]; b < layout.hi_bin[k]; ++b) {
        er += ref_pow(b, j);
        ed += deg_pow(b, j);
      }
      bands.ref(k, static_cast<Eigen::Index>(jj)) = std::sqrt(er);
      bands.deg(k, static_cast<Eigen::Index>(jj)) = std::sqrt(ed);
    }
  }
  return bands;
}

Eigen::MatrixXd stoi_correlations(const Eigen::MatrixXd& ref_bands,
                                  const Eigen::MatrixXd& deg_bands) {
  if (ref_bands.rows() != deg_bands.rows() || ref_bands.cols() != deg_bands.cols())
    throw ValidationError("stoi_correlations: band matrix shape mismatch");
  const int num_segments = static_cast<int>(ref_bands.cols()) - sc::kSegmentFrames + 1;
  if (num_segments < 1) throw ValidationError("stoi_correlations: too few frames");

  const double clip = 1.0 + std::pow(10.0, sc::kClipDb / 20.0);
  Eigen::MatrixXd d(ref_bands.rows(), num_segments);
  for (int m = 0; m < num_segments; ++m) {
    for (Eigen::Index k = 0; k < ref_bands.rows(); ++k) {
      Eigen::VectorXd x = ref_bands.row(k).segment(m, sc::kSegmentFrames);
      Eigen::VectorXd y = deg_bands.row(k).segment(m, sc::kSegmentFrames);
      const double ny = y.norm();
      const double alpha = ny > 1e-20 ? x.norm() / ny : 0.0;
      Eigen::VectorXd y_clipped =
          (alpha * y.array()).min(x.array() * clip).matrix();
      d(k, m) = pearson(x, y_clipped);
    }
  }
  return d;
}

double stoi_from_bands(const Eigen::MatrixXd& ref_bands, const Eigen::MatrixXd& deg_bands) {
  return stoi_correlations(ref_bands, deg_bands).mean();
}

double estoi_segment_score(const Eigen::MatrixXd& ref_seg, const Eigen::MatrixXd& deg_seg) {
  if (ref_seg.rows() != deg_seg.rows() || ref_seg.cols() != deg_seg.cols())
    throw ValidationError("estoi_segment_score: segment shape mismatch");

  auto normalize = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
      out.row(r).array() -= out.row(r).mean();
      const double n = out.row(r).norm();
      if (n > 1e-20) out.row(r) /= n;
    }
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      out.col(c).array() -= out.col(c).mean();
      const double n = out.col(c).norm();
      if (n > 1e-20) out.col(c) /= n;
    }
    return out;
  };

  const Eigen::MatrixXd a = normalize(ref_seg);
  const Eigen::MatrixXd b = normalize(deg_seg);
  double acc = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) acc += a.col(c).dot(b.col(c));
  return acc / static_cast<double>(a.cols());
}

double estoi_from_bands(const Eigen::MatrixXd& ref_bands, const Eigen::MatrixXd& deg_bands) {
  if (ref_bands.rows() != deg_bands.rows() || ref_bands.cols() != deg_bands.cols())
    throw ValidationError("estoi_from_bands: band matrix shape mismatch");
  const int num_segments = static_cast<int>(ref_bands.cols()) - sc::kSegmentFrames + 1;
  if (num_segments < 1) throw ValidationError("estoi_from_bands: too few frames");

  double acc = 0.0;
  for (int m = 0; m < num_segments; ++m)
    acc += estoi_segment_score(ref_bands.middleCols(m, sc::kSegmentFrames),
                               deg_bands.middleCols(m, sc::kSegmentFrames));
  return acc / num_segments;
}

double stoi(std::span<const double> reference, std::span<const double> degraded,
            int sample_rate) {
  const StoiBands bands = stoi_decompose(reference, degraded, sample_rate);
  return stoi_from_bands(bands.ref, bands.deg);
}

double estoi(std::span<const double> reference, std::span<const double> degraded,
             int sample_rate) {
  const StoiBands bands = stoi_decompose(reference, degraded, sample_rate);
  return estoi_from_bands(bands.ref, bands.deg);
}

double si_sdr(std::span<const double> reference, std::span<const double> degraded) {
  if (reference.size() != degraded.size())
    throw ValidationError("si_sdr: length mismatch");
  Eigen::Map<const Eigen::VectorXd> r(reference.data(), static_cast<Eigen::Index>(reference.size()));
  Eigen::Map<const Eigen::VectorXd> d(degraded.data(), static_cast<Eigen::Index>(degraded.size()));

  const double rr = r.squaredNorm();
  if (rr <= 0.0) throw ValidationError("si_sdr: zero reference");
  const double scale = d.dot(r) / rr;
  const Eigen::VectorXd target = scale * r;
  const double target_energy = target.squaredNorm();
  const double residual_energy = (d - target).squaredNorm();

  if (target_energy <= 0.0) return -kSiSdrCapDb;
  if (residual_energy <= 0.0) return kSiSdrCapDb;
  const double value = 10.0 * std::log10(target_energy / residual_energy);
  return std::min(std::max(value, -kSiSdrCapDb), kSiSdrCapDb);
}

namespace {

MetricRow score_pair(const std::string& id, const std::string& condition,
                     std::span<const double> ref, std::span<const double> est) {
  MetricRow row;
  row.id = id;
  row.condition = condition;
  row.stoi = stoi(ref, est, sc::kSampleRate);
  row.estoi = estoi(ref, est, sc::kSampleRate);
  row.si_sdr_db = si_sdr(ref, est);
  return row;
}

}  // namespace

MetricReport evaluate_corpus(const std::vector<ManifestEntry>& entries,
                             const std::vector<EnhanceSystem>& systems,
                             const std::string& out_csv, const std::string& config_digest) {
  MetricReport report;
  report.config_digest = config_digest;
  report.note =
      "si_sdr_db is the scale-invariant SDR (projection-based), not the "
      "512-tap distortion-filter SDR; the beamformer applies no reference "
      "rescaling, so a scale-invariant criterion is used throughout";

  std::vector<ManifestEntry> simu;
  for (const auto& e : entries)
    if (e.kind == EntryKind::kSimu) simu.push_back(e);
  if (simu.empty())
    throw ValidationError("evaluate_corpus: no simu entries with clean references");

  for (const auto& entry : simu) {
    if (!entry.clean_path)
      throw ValidationError("evaluate_corpus: entry " + entry.id + " has no clean reference");
    const AudioClip mix = read_wav(entry.mix_path);
    const AudioClip clean = read_wav(*entry.clean_path);
    if (mix.sample_rate != sc::kSampleRate || clean.sample_rate != sc::kSampleRate)
      throw ValidationError("evaluate_corpus: only 16 kHz corpora are supported");
    if (entry.ref_channel >= clean.channels() || entry.ref_channel >= mix.channels())
      throw ValidationError("evaluate_corpus: ref_channel out of range for " + entry.id);

    const Eigen::VectorXd ref = clean.samples.row(entry.ref_channel);
    const Eigen::VectorXd noisy = mix.samples.row(entry.ref_channel);
    const std::span<const double> ref_span(ref.data(), static_cast<std::size_t>(ref.size()));

    report.rows.push_back(score_pair(
        entry.id, "noisy", ref_span,
        std::span<const double>(noisy.data(), static_cast<std::size_t>(noisy.size()))));
    for (const auto& system : systems) {
      const std::vector<double> est = system.run(entry);
      if (est.size() != static_cast<std::size_t>(ref.size()))
        throw ValidationError("evaluate_corpus: system '" + system.name +
                              "' returned a different length for " + entry.id);
      report.rows.push_back(score_pair(entry.id, system.name, ref_span,
                                       std::span<const double>(est.data(), est.size())));
    }
  }

  // per-condition arithmetic means
  std::map<std::string, std::pair<MetricRow, int>> acc;
  for (const auto& row : report.rows) {
    auto& [sum, n] = acc[row.condition];
    sum.condition = row.condition;
    sum.stoi += row.stoi;
    sum.estoi += row.estoi;
    sum.si_sdr_db += row.si_sdr_db;
    ++n;
  }
  for (auto& [condition, pair] : acc) {
    MetricRow mean = pair.first;
    mean.id = "__mean__";
    mean.stoi /= pair.second;
    mean.estoi /= pair.second;
    mean.si_sdr_db /= pair.second;
    report.means[condition] = mean;
  }

  if (!out_csv.empty()) {
    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw IoError("cannot write report CSV: " + out_csv);
    out << "id,condition,stoi,estoi,si_sdr_db\n";
    char buf[256];
    auto emit = [&](const MetricRow& r) {
      std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f\n", r.id.c_str(),
                    r.condition.c_str(), r.stoi, r.estoi, r.si_sdr_db);
      out << buf;
    };
    for (const auto& r : report.rows) emit(r);
    for (const auto& [condition, mean] : report.means) emit(mean);

    nlohmann::json meta;
    meta["config_digest"] = report.config_digest;
    meta["note"] = report.note;
    meta["num_rows"] = report.rows.size();
    std::ofstream meta_out(out_csv + ".meta.json", std::ios::trunc);
    meta_out << meta.dump(2) << "\n";
  }
  return report;
}

}  // namespace maskbeam
