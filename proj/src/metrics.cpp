#include "navp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "navp/error.hpp"

namespace navp {

GrayImage render_labels(const LabelMap& map, std::uint32_t num_classes) {
  if (num_classes == 0) throw Error(ErrorCode::kInvalidArgument, "num_classes must be >= 1");
  std::array<std::uint8_t, 256> lut{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    lut[i] = num_classes == 1
                 ? 0
                 : static_cast<std::uint8_t>(std::min<std::uint32_t>(
                       255, (2 * 255 * i + (num_classes - 1)) / (2 * (num_classes - 1))));
  }
  GrayImage img{map.width(), map.height(), {}};
  const auto labels = map.labels();
  img.values.resize(labels.size());
  std::transform(labels.begin(), labels.end(), img.values.begin(),
                 [&lut](std::uint8_t l) { return lut[l]; });
  return img;
}

double ssim(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorCode::kDimensionMismatch, "SSIM inputs differ in size");
  if (a.values.size() != static_cast<std::size_t>(a.width) * a.height ||
      b.values.size() != a.values.size() || a.values.empty())
    throw Error(ErrorCode::kInvalidArgument, "malformed grey image");
  if (a.values == b.values) return 1.0;

  constexpr double kC1 = (0.01 * 255) * (0.01 * 255);
  constexpr double kC2 = (0.03 * 255) * (0.03 * 255);
  const std::uint32_t w = a.width;
  const std::uint32_t h = a.height;
  const std::uint32_t win_w = std::min<std::uint32_t>(8, w);
  const std::uint32_t win_h = std::min<std::uint32_t>(8, h);
  const std::int64_t n = static_cast<std::int64_t>(win_w) * win_h;

  // Per-column sums over the current band of win_h rows, kept exactly in
  // integers (a column holds at most 8 * 255^2). Only the diff count is kept
  // for every column; the others are brought up to date on demand, since
  // windows without a differing pixel evaluate to exactly 1.
  std::vector<std::int32_t> cx(w), cy(w), cxx(w), cyy(w), cxy(w), cd(w, 0);
  std::vector<std::int64_t> valid(w, -2);  // band start the column sums belong to
  const std::uint8_t* va = a.values.data();
  const std::uint8_t* vb = b.values.data();
  const auto at = [w](std::uint32_t r, std::uint32_t x) {
    return static_cast<std::size_t>(r) * w + x;
  };
  for (std::uint32_t r = 0; r < win_h; ++r)
    for (std::uint32_t x = 0; x < w; ++x) cd[x] += va[at(r, x)] != vb[at(r, x)];

  const auto refresh = [&](std::uint32_t k, std::uint32_t y) {
    if (valid[k] == y) return;
    if (valid[k] == static_cast<std::int64_t>(y) - 1) {
      const std::int32_t ia = va[at(y + win_h - 1, k)], ib = vb[at(y + win_h - 1, k)];
      const std::int32_t oa = va[at(y - 1, k)], ob = vb[at(y - 1, k)];
      cx[k] += ia - oa;
      cy[k] += ib - ob;
      cxx[k] += ia * ia - oa * oa;
      cyy[k] += ib * ib - ob * ob;
      cxy[k] += ia * ib - oa * ob;
    } else {
      std::int32_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::uint32_t r = y; r < y + win_h; ++r) {
        const std::int32_t ia = va[at(r, k)], ib = vb[at(r, k)];
        sx += ia;
        sy += ib;
        sxx += ia * ia;
        syy += ib * ib;
        sxy += ia * ib;
      }
      cx[k] = sx;
      cy[k] = sy;
      cxx[k] = sxx;
      cyy[k] = syy;
      cxy[k] = sxy;
    }
    valid[k] = y;
  };

  double total = 0.0;
  std::size_t windows = 0;
  const double nd = static_cast<double>(n);
  const double nn = nd * nd;
  for (std::uint32_t y = 0; y + win_h <= h; ++y) {
    if (y > 0) {
      const std::uint8_t* __restrict ia = va + at(y + win_h - 1, 0);
      const std::uint8_t* __restrict ib = vb + at(y + win_h - 1, 0);
      const std::uint8_t* __restrict oa = va + at(y - 1, 0);
      const std::uint8_t* __restrict ob = vb + at(y - 1, 0);
      std::int32_t* __restrict pd = cd.data();
      for (std::uint32_t x = 0; x < w; ++x)
        pd[x] += static_cast<std::int32_t>(ia[x] != ib[x]) -
                 static_cast<std::int32_t>(oa[x] != ob[x]);
    }
    std::int32_t sd = 0;
    for (std::uint32_t x = 0; x < win_w; ++x) sd += cd[x];
    // Running sums of the previous window, when it was evaluated.
    bool running = false;
    std::int64_t sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (std::uint32_t x = 0;; ++x) {
      if (sd == 0) {
        total += 1.0;
        running = false;
      } else {
        if (running) {
          const std::uint32_t in = x + win_w - 1, out = x - 1;
          refresh(in, y);
          sx += cx[in] - cx[out];
          sy += cy[in] - cy[out];
          sxx += cxx[in] - cxx[out];
          syy += cyy[in] - cyy[out];
          sxy += cxy[in] - cxy[out];
        } else {
          sx = sy = sxx = syy = sxy = 0;
          for (std::uint32_t k = x; k < x + win_w; ++k) {
            refresh(k, y);
            sx += cx[k];
            sy += cy[k];
            sxx += cxx[k];
            syy += cyy[k];
            sxy += cxy[k];
          }
          running = true;
        }
        const double mx = static_cast<double>(sx) / nd;
        const double my = static_cast<double>(sy) / nd;
        const double vx = static_cast<double>(n * sxx - sx * sx) / nn;
        const double vy = static_cast<double>(n * syy - sy * sy) / nn;
        const double cov = static_cast<double>(n * sxy - sx * sy) / nn;
        total += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                 ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      }
      ++windows;
      if (x + win_w >= w) break;
      sd += cd[x + win_w] - cd[x];
    }
  }
  return total / static_cast<double>(windows);
}

double ssim_labels(const LabelMap& reference, const LabelMap& test) {
  if (reference.width() != test.width() || reference.height() != test.height())
    throw Error(ErrorCode::kDimensionMismatch, "label maps differ in size");
  if (reference == test) return 1.0;
  const std::uint32_t classes = std::max(reference.num_classes(), test.num_classes());
  return ssim(render_labels(reference, classes), render_labels(test, classes));
}

std::uint32_t default_bf_tolerance(std::uint32_t width, std::uint32_t height) {
  const double diag = std::hypot(static_cast<double>(width), static_cast<double>(height));
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(0.0075 * diag)));
}

namespace {

// Boundary pixels (a 4-neighbour has a different label), bucketed by class
// and row so that "any boundary pixel of class c in row y between x0 and x1"
// is a binary search.
class BoundaryIndex {
 public:
  explicit BoundaryIndex(const LabelMap& m) : h_(m.height()) {
    const std::uint32_t w = m.width();
    const std::uint32_t h = m.height();
    const auto l = m.labels();
    struct Pixel {
      std::uint32_t y, x;
      std::uint8_t c;
    };
    std::vector<Pixel> found;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) + 8, 0);
    for (std::uint32_t y = 0; y < h; ++y) {
      const std::uint8_t* row = l.data() + static_cast<std::size_t>(y) * w;
      const std::uint8_t* up = y > 0 ? row - w : row;
      const std::uint8_t* down = y + 1 < h ? row + w : row;
      // Branch-free mask so the loop vectorizes; then skip zero words.
      for (std::uint32_t x = 0; x < w; ++x)
        mask[x] = static_cast<std::uint8_t>((row[x] != up[x]) | (row[x] != down[x]));
      for (std::uint32_t x = 1; x < w; ++x) {
        const std::uint8_t d = row[x] != row[x - 1];
        mask[x] |= d;
        mask[x - 1] |= d;
      }
      for (std::uint32_t x = 0; x < w; x += 8) {
        std::uint64_t word;
        std::memcpy(&word, mask.data() + x, 8);
        if (word == 0) continue;
        for (std::uint32_t k = x; k < std::min(x + 8, w); ++k)
          if (mask[k]) found.push_back({y, k, row[k]});
      }
    }
    for (const Pixel& p : found) ++count_[p.c];
    // With more than one class, every class touches another somewhere, so
    // a class without boundary pixels is absent unless it fills the map.
    for (std::size_t c = 0; c < 256; ++c) present_[c] = count_[c] > 0;
    if (found.empty() && !l.empty()) present_[l[0]] = true;
    for (std::size_t c = 0; c < 256; ++c) {
      if (count_[c] == 0) continue;
      auto& cls = classes_[c];
      cls.offsets.assign(static_cast<std::size_t>(h) + 1, 0);
      cls.ys.reserve(count_[c]);
      cls.xs.reserve(count_[c]);
    }
    for (const Pixel& p : found) {
      auto& cls = classes_[p.c];
      ++cls.offsets[p.y + 1];
      cls.ys.push_back(p.y);
      cls.xs.push_back(p.x);
    }
    for (std::size_t c = 0; c < 256; ++c) {
      auto& off = classes_[c].offsets;
      for (std::size_t y = 1; y < off.size(); ++y) off[y] += off[y - 1];
    }
  }

  bool present(std::size_t c) const { return present_[c]; }
  std::size_t count(std::size_t c) const { return count_[c]; }

  bool any(std::uint8_t c, std::int64_t y, std::int64_t x0, std::int64_t x1) const {
    if (y < 0 || y >= h_) return false;
    const auto& cls = classes_[c];
    const auto first = cls.xs.begin() + cls.offsets[static_cast<std::size_t>(y)];
    const auto last = cls.xs.begin() + cls.offsets[static_cast<std::size_t>(y) + 1];
    const auto it = std::lower_bound(first, last, x0 < 0 ? 0 : static_cast<std::uint32_t>(x0));
    return it != last && static_cast<std::int64_t>(*it) <= x1;
  }

  // Boundary pixels of class c here that have a class-c boundary pixel of
  // `other` within the tolerance disc.
  std::size_t matched(std::uint8_t c, const BoundaryIndex& other,
                      const std::vector<std::int64_t>& half_widths) const {
    const auto tol = static_cast<std::int64_t>(half_widths.size()) - 1;
    const auto& cls = classes_[c];
    std::size_t hits = 0;
    for (std::size_t i = 0; i < cls.xs.size(); ++i) {
      const std::int64_t y = cls.ys[i];
      const std::int64_t x = cls.xs[i];
      for (std::int64_t dy = -tol; dy <= tol; ++dy) {
        const std::int64_t hw = half_widths[static_cast<std::size_t>(std::abs(dy))];
        if (other.any(c, y + dy, x - hw, x + hw)) {
          ++hits;
          break;
        }
      }
    }
    return hits;
  }

 private:
  struct ClassPixels {
    std::vector<std::uint32_t> offsets;  // per-row start into ys/xs
    std::vector<std::uint32_t> ys;
    std::vector<std::uint32_t> xs;
  };
  std::int64_t h_;
  std::array<bool, 256> present_{};
  std::array<std::size_t, 256> count_{};
  std::array<ClassPixels, 256> classes_;
};

}  // namespace

double bf_score(const LabelMap& reference, const LabelMap& test, std::uint32_t tolerance) {
  if (reference.width() != test.width() || reference.height() != test.height())
    throw Error(ErrorCode::kDimensionMismatch, "label maps differ in size");
  if (reference.labels().size() == test.labels().size() &&
      std::equal(reference.labels().begin(), reference.labels().end(), test.labels().begin()))
    return 1.0;

  // Largest dx with dx^2 + dy^2 <= tol^2, for each |dy| <= tol.
  const std::int64_t tol = tolerance;
  std::vector<std::int64_t> half_widths(static_cast<std::size_t>(tol) + 1);
  for (std::int64_t dy = 0; dy <= tol; ++dy) {
    std::int64_t dx = static_cast<std::int64_t>(std::sqrt(static_cast<double>(tol * tol - dy * dy)));
    while (dx * dx + dy * dy > tol * tol) --dx;
    while ((dx + 1) * (dx + 1) + dy * dy <= tol * tol) ++dx;
    half_widths[static_cast<std::size_t>(dy)] = dx;
  }

  const BoundaryIndex ref(reference);
  const BoundaryIndex tst(test);
  double sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t c = 0; c < 256; ++c) {
    if (!ref.present(c) && !tst.present(c)) continue;
    ++classes;
    const std::size_t nr = ref.count(c);
    const std::size_t nt = tst.count(c);
    if (nr == 0 && nt == 0) {
      sum += 1.0;
      continue;
    }
    if (nr == 0 || nt == 0) continue;
    const auto cls = static_cast<std::uint8_t>(c);
    const double precision = static_cast<double>(tst.matched(cls, ref, half_widths)) / nt;
    const double recall = static_cast<double>(ref.matched(cls, tst, half_widths)) / nr;
    if (precision + recall > 0.0) sum += 2.0 * precision * recall / (precision + recall);
  }
  return sum / static_cast<double>(classes);
}

double bf_score(const LabelMap& reference, const LabelMap& test) {
  return bf_score(reference, test, default_bf_tolerance(reference.width(), reference.height()));
}

LabelMap upscale_labels(const LabelMap& map, std::uint32_t tw, std::uint32_t th) {
  if (tw < map.width() || th < map.height())
    throw Error(ErrorCode::kInvalidArgument, "upscale target smaller than source");
  if (tw == map.width() && th == map.height()) return map;
  std::vector<std::uint32_t> src_x(tw);
  for (std::uint32_t x = 0; x < tw; ++x)
    src_x[x] = static_cast<std::uint32_t>(static_cast<std::uint64_t>(x) * map.width() / tw);
  const auto src = map.labels();
  std::vector<std::uint8_t> out(static_cast<std::size_t>(tw) * th);
  for (std::uint32_t y = 0; y < th; ++y) {
    const auto sy = static_cast<std::uint32_t>(static_cast<std::uint64_t>(y) * map.height() / th);
    const std::uint8_t* row = src.data() + static_cast<std::size_t>(sy) * map.width();
    std::uint8_t* dst = out.data() + static_cast<std::size_t>(y) * tw;
    for (std::uint32_t x = 0; x < tw; ++x) dst[x] = row[src_x[x]];
  }
  return LabelMap(tw, th, std::move(out), map.num_classes());
}

Micros lower_median(std::vector<Micros> values) {
  if (values.empty()) throw Error(ErrorCode::kEmptyRun, "median of no values");
  const std::size_t k = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

Micros nearest_rank(std::vector<Micros> values, double fraction) {
  if (values.empty()) throw Error(ErrorCode::kEmptyRun, "percentile of no values");
  const double exact = fraction * static_cast<double>(values.size());
  // Guard against 0.95 * 100 landing a hair above 95.
  auto rank = static_cast<std::size_t>(std::ceil(exact - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

RunSummary summarize(const std::vector<FrameRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyRun, "no completed frames to summarize");
  RunSummary s;
  s.frames = records.size();
  std::vector<Micros> rtts;
  rtts.reserve(records.size());
  double rtt_sum = 0, infer_sum = 0, ssim_sum = 0, bf_sum = 0, bytes_sum = 0;
  for (const auto& r : records) {
    rtts.push_back(r.rtt_us);
    rtt_sum += static_cast<double>(r.rtt_us);
    infer_sum += static_cast<double>(r.infer_us);
    ssim_sum += r.ssim;
    bf_sum += r.bf;
    bytes_sum += static_cast<double>(r.bytes);
    const auto tier = static_cast<std::size_t>(std::max(0, r.tier));
    if (s.tier_histogram.size() <= tier) s.tier_histogram.resize(tier + 1, 0);
    ++s.tier_histogram[tier];
  }
  const double n = static_cast<double>(records.size());
  s.rtt_mean_ms = rtt_sum / n / 1000.0;
  s.rtt_median_ms = static_cast<double>(lower_median(rtts)) / 1000.0;
  s.rtt_p95_ms = static_cast<double>(nearest_rank(rtts, 0.95)) / 1000.0;
  s.inference_mean_ms = infer_sum / n / 1000.0;
  s.ssim_mean = ssim_sum / n;
  s.bf_mean = bf_sum / n;
  s.bytes_mean = bytes_sum / n;
  return s;
}

void write_csv(std::ostream& out, const std::vector<FrameRecord>& records) {
  out << kCsvHeader << '\n';
  char line[256];
  for (const auto& r : records) {
    std::snprintf(line, sizeof line, "%llu,%d,%lld,%lld,%lld,%llu,%.6f,%.6f\n",
                  static_cast<unsigned long long>(r.frame_id), r.tier,
                  static_cast<long long>(r.sent_us), static_cast<long long>(r.rtt_us),
                  static_cast<long long>(r.infer_us), static_cast<unsigned long long>(r.bytes),
                  r.ssim, r.bf);
    out << line;
  }
}

std::vector<FrameRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw Error(ErrorCode::kIo, "CSV header does not match the frame record schema");
  std::vector<FrameRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FrameRecord r;
    unsigned long long id = 0, bytes = 0;
    long long sent = 0, rtt = 0, infer = 0;
    if (std::sscanf(line.c_str(), "%llu,%d,%lld,%lld,%lld,%llu,%lf,%lf", &id, &r.tier, &sent,
                    &rtt, &infer, &bytes, &r.ssim, &r.bf) != 8)
      throw Error(ErrorCode::kIo, "malformed CSV row at line " + std::to_string(line_no));
    r.frame_id = id;
    r.sent_us = sent;
    r.rtt_us = rtt;
    r.infer_us = infer;
    r.bytes = bytes;
    records.push_back(r);
  }
  return records;
}

std::string summary_to_json(const RunSummary& s) {
  nlohmann::ordered_json j;
  j["scenario"] = s.scenario;
  j["mode"] = s.mode;
  j["seed"] = s.seed;
  j["frames"] = s.frames;
  j["rtt_mean_ms"] = s.rtt_mean_ms;
  j["rtt_median_ms"] = s.rtt_median_ms;
  j["rtt_p95_ms"] = s.rtt_p95_ms;
  j["inference_mean_ms"] = s.inference_mean_ms;
  j["ssim_mean"] = s.ssim_mean;
  j["bf_mean"] = s.bf_mean;
  j["bytes_mean"] = s.bytes_mean;
  j["tier_histogram"] = s.tier_histogram;
  j["errors"] = s.errors;
  j["skipped_ticks"] = s.skipped_ticks;
  j["duration_us"] = s.duration_us;
  return j.dump(2) + "\n";
}

RunSummary summary_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("summary JSON: ") + e.what());
  }
  RunSummary s;
  try {
    s.scenario = j.at("scenario").get<std::string>();
    s.mode = j.at("mode").get<std::string>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.frames = j.at("frames").get<std::size_t>();
    s.rtt_mean_ms = j.at("rtt_mean_ms").get<double>();
    s.rtt_median_ms = j.at("rtt_median_ms").get<double>();
    s.rtt_p95_ms = j.at("rtt_p95_ms").get<double>();
    s.inference_mean_ms = j.at("inference_mean_ms").get<double>();
    s.ssim_mean = j.at("ssim_mean").get<double>();
    s.bf_mean = j.at("bf_mean").get<double>();
    s.bytes_mean = j.value("bytes_mean", 0.0);
    s.tier_histogram = j.value("tier_histogram", std::vector<std::size_t>{});
    s.errors = j.value("errors", std::size_t{0});
    s.skipped_ticks = j.value("skipped_ticks", std::size_t{0});
    s.duration_us = j.value("duration_us", Micros{0});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("summary JSON: ") + e.what());
  }
  return s;
}

}  // namespace navp
