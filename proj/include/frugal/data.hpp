#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "frugal/core.hpp"

namespace frugal {

using LabelMap = std::map<std::size_t, int>;

// Feature matrix plus (possibly hidden) labels. Labels may be empty for pools
// registered for human labeling, in which case only an interactive oracle can
// label it.
struct Dataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> ids;
  int nc = 2;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dims() const noexcept { return features.cols(); }
  bool has_labels() const noexcept { return !labels.empty(); }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.features = features.select_rows(rows);
    out.nc = nc;
    out.ids.reserve(rows.size());
    for (auto r : rows) out.ids.push_back(ids[r]);
    if (has_labels()) {
      out.labels.reserve(rows.size());
      for (auto r : rows) out.labels.push_back(labels[r]);
    }
    return out;
  }

  // Throws ParameterError naming the first violated invariant.
  void validate() const {
    if (size() < 1) throw ParameterError("dataset: needs at least one sample");
    if (dims() < 1) throw ParameterError("dataset: needs at least one feature");
    if (nc < 2) throw ParameterError("dataset: needs at least two classes");
    if (ids.size() != size()) throw ParameterError("dataset: ids length does not match rows");
    if (has_labels() && labels.size() != size()) throw ParameterError("dataset: labels length does not match rows");
    for (double v : features.data())
      if (!std::isfinite(v)) throw ParameterError("dataset: non-finite feature value");
    for (int y : labels)
      if (y < 0 || y >= nc) throw ParameterError("dataset: label " + std::to_string(y) + " outside [0, nc)");
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
      if (!seen.insert(id).second) throw ParameterError("dataset: duplicate id '" + id + "'");
  }

  // Warnings for class ids in [0, nc) that no sample carries.
  std::vector<std::string> empty_class_warnings() const {
    std::vector<std::string> out;
    if (!has_labels()) return out;
    std::vector<std::size_t> counts(static_cast<std::size_t>(nc), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    for (int c = 0; c < nc; ++c)
      if (counts[static_cast<std::size_t>(c)] == 0) out.push_back("class " + std::to_string(c) + " has no samples");
    return out;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    cells.push_back(trim(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return cells;
}

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

// Parses `id, f0..f{d-1}, label` rows after a header line. Lines starting with
// '#' before the header are skipped (generated files carry their config hash
// there).
inline Dataset parse_csv(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  std::size_t columns = 0;
  bool header_seen = false;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  int max_label = -1;

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = detail::trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      if (view.front() == '#') continue;
      columns = detail::split_commas(view).size();
      if (columns < 3) throw IngestError(lineno, "header needs id, at least one feature and label columns");
      header_seen = true;
      continue;
    }
    auto cells = detail::split_commas(view);
    if (cells.size() != columns)
      throw IngestError(lineno, "expected " + std::to_string(columns) + " fields, got " + std::to_string(cells.size()));
    std::string id(cells.front());
    if (id.empty()) throw IngestError(lineno, "empty id");
    if (!seen.insert(id).second) throw IngestError(lineno, "duplicate id '" + id + "'");
    for (std::size_t j = 1; j + 1 < cells.size(); ++j) {
      double v = 0.0;
      auto cell = cells[j];
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw IngestError(lineno, "malformed feature '" + std::string(cell) + "'");
      if (!std::isfinite(v)) throw IngestError(lineno, "non-finite feature '" + std::string(cell) + "'");
      values.push_back(v);
    }
    int label = 0;
    auto cell = cells.back();
    auto res = std::from_chars(cell.data(), cell.data() + cell.size(), label);
    if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
      throw IngestError(lineno, "malformed label '" + std::string(cell) + "'");
    if (label < 0) throw IngestError(lineno, "negative label " + std::to_string(label));
    max_label = std::max(max_label, label);
    ds.ids.push_back(std::move(id));
    ds.labels.push_back(label);
  }
  if (!header_seen) throw IngestError(lineno, "missing header line");
  if (ds.ids.empty()) throw IngestError(lineno, "no data rows");

  const std::size_t d = columns - 2;
  ds.features = Matrix(ds.ids.size(), d);
  std::copy(values.begin(), values.end(), ds.features.data().begin());
  ds.nc = std::max(2, max_label + 1);
  ds.warnings = ds.empty_class_warnings();
  return ds;
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_csv(in);
}

inline void write_csv(std::ostream& out, const Dataset& ds, std::string_view comment = {}) {
  if (!comment.empty()) out << "# " << comment << '\n';
  out << "id";
  for (std::size_t j = 0; j < ds.dims(); ++j) out << ",f" << j;
  out << ",label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.ids[i];
    for (double v : ds.features.row(i)) out << ',' << detail::format_double(v);
    out << ',' << (ds.has_labels() ? ds.labels[i] : 0) << '\n';
  }
}

inline void write_csv(const std::string& path, const Dataset& ds, std::string_view comment = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(out, ds, comment);
  if (!out) throw Error("write failed for '" + path + "'");
}

struct MixtureParams {
  int nc = 4;
  std::size_t per_class = 500;
  std::size_t d = 2;
  double spread = 0.1;
  double label_noise = 0.0;  // probability of replacing a label by a uniformly drawn other class
  std::uint64_t seed = 7;
};

// Centre of class c: the base-s digits of c spread over the first coordinates,
// with s the smallest side such that s^d >= nc. Neighbouring centres sit
// 10 * spread apart.
inline std::vector<double> lattice_center(int c, int nc, std::size_t d, double spread) {
  std::size_t side = 2;
  auto fits = [&](std::size_t s) {
    double cap = 1.0;
    for (std::size_t j = 0; j < d; ++j) cap *= static_cast<double>(s);
    return cap >= nc;
  };
  while (!fits(side)) ++side;
  std::vector<double> center(d, 0.0);
  auto rest = static_cast<std::size_t>(c);
  for (std::size_t j = 0; j < d && rest > 0; ++j) {
    center[j] = static_cast<double>(rest % side) * 10.0 * spread;
    rest /= side;
  }
  return center;
}

inline Dataset generate_gaussian_mixture(const MixtureParams& p) {
  if (p.nc < 2) throw ParameterError("generator: nc must be >= 2");
  if (p.per_class < 1) throw ParameterError("generator: per_class must be >= 1");
  if (p.d < 1) throw ParameterError("generator: d must be >= 1");
  if (!(p.spread > 0.0)) throw ParameterError("generator: spread must be > 0");
  if (!(p.label_noise >= 0.0 && p.label_noise <= 1.0)) throw ParameterError("generator: label_noise must be in [0, 1]");

  Rng rng(derive_seed(p.seed, stream::kGenerator));
  Dataset ds;
  const std::size_t n = static_cast<std::size_t>(p.nc) * p.per_class;
  ds.features = Matrix(n, p.d);
  ds.nc = p.nc;
  ds.labels.reserve(n);
  ds.ids.reserve(n);
  std::size_t i = 0;
  for (int c = 0; c < p.nc; ++c) {
    const auto center = lattice_center(c, p.nc, p.d, p.spread);
    for (std::size_t k = 0; k < p.per_class; ++k, ++i) {
      for (std::size_t j = 0; j < p.d; ++j) ds.features(i, j) = center[j] + p.spread * rng.normal();
      ds.labels.push_back(c);
      ds.ids.push_back("g" + std::to_string(i));
    }
  }
  if (p.label_noise > 0.0) {
    for (auto& y : ds.labels) {
      if (rng.uniform() < p.label_noise) {
        const int other = static_cast<int>(rng.below(static_cast<std::size_t>(p.nc - 1)));
        y = other >= y ? other + 1 : other;
      }
    }
  }
  return ds;
}

// Seeded train/test split; both halves keep the original row order.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ParameterError("split: fraction must be in (0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.size())));
  if (n_test == 0 || n_test >= ds.size()) throw ParameterError("split: both halves must be non-empty");
  Rng rng(derive_seed(seed, stream::kSplit));
  auto test_rows = rng.sample_without_replacement(ds.size(), n_test);
  std::sort(test_rows.begin(), test_rows.end());
  std::vector<std::size_t> train_rows;
  train_rows.reserve(ds.size() - n_test);
  for (std::size_t i = 0, j = 0; i < ds.size(); ++i) {
    if (j < test_rows.size() && test_rows[j] == i) {
      ++j;
    } else {
      train_rows.push_back(i);
    }
  }
  return {ds.subset(train_rows), ds.subset(test_rows)};
}

// Index bookkeeping for one active-learning run over a pool of n samples.
// displays[t] is D_t; the last display may still be awaiting labels.
class PoolState {
 public:
  explicit PoolState(std::size_t pool_size = 0) : n_(pool_size), shown_(pool_size, false) {}

  std::size_t pool_size() const noexcept { return n_; }
  const std::vector<std::vector<std::size_t>>& displays() const noexcept { return displays_; }
  const std::vector<std::vector<std::size_t>>& holdouts() const noexcept { return holdouts_; }
  const LabelMap& labeled() const noexcept { return labeled_; }
  std::size_t iteration() const noexcept { return iteration_; }
  std::size_t shown_count() const noexcept { return shown_total_; }

  void add_display(std::vector<std::size_t> display, std::vector<std::size_t> holdout) {
    std::sort(display.begin(), display.end());
    std::sort(holdout.begin(), holdout.end());
    for (auto i : display) {
      if (i >= n_) throw ParameterError("display index " + std::to_string(i) + " outside pool");
      if (shown_[i]) throw ParameterError("display index " + std::to_string(i) + " already shown");
    }
    if (!std::includes(display.begin(), display.end(), holdout.begin(), holdout.end()))
      throw ParameterError("holdout must be a subset of its display");
    for (auto i : display) shown_[i] = true;
    shown_total_ += display.size();
    displays_.push_back(std::move(display));
    holdouts_.push_back(std::move(holdout));
  }

  void record_labels(const LabelMap& labels) {
    for (auto [i, y] : labels) labeled_[i] = y;
  }

  void advance() { ++iteration_; }

  bool is_shown(std::size_t i) const { return shown_[i]; }

  // Pool indices never shown in any display, ascending.
  std::vector<std::size_t> candidates() const {
    std::vector<std::size_t> out;
    out.reserve(n_ - shown_total_);
    for (std::size_t i = 0; i < n_; ++i)
      if (!shown_[i]) out.push_back(i);
    return out;
  }

  // Union of (D_k minus V_k) over displays whose labels are recorded.
  std::vector<std::size_t> training_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < displays_.size(); ++k) {
      const auto& h = holdouts_[k];
      for (auto i : displays_[k])
        if (labeled_.count(i) && !std::binary_search(h.begin(), h.end(), i)) out.push_back(i);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::size_t n_;
  std::vector<bool> shown_;
  std::size_t shown_total_ = 0;
  std::vector<std::vector<std::size_t>> displays_;
  std::vector<std::vector<std::size_t>> holdouts_;
  LabelMap labeled_;
  std::size_t iteration_ = 0;
};

struct AwaitingLabels {
  std::vector<std::size_t> missing;
};

using RevealResult = std::variant<LabelMap, AwaitingLabels>;

// Label source. A simulated oracle reads hidden ground truth; an interactive
// oracle answers from labels submitted by a human.
class Oracle {
 public:
  enum class Mode { simulated, interactive };

  static Oracle simulated(std::vector<int> hidden) { return Oracle(Mode::simulated, std::move(hidden)); }
  static Oracle interactive() { return Oracle(Mode::interactive, {}); }

  Mode mode() const noexcept { return mode_; }

  void submit(std::size_t index, int label) {
    if (mode_ != Mode::interactive) throw ParameterError("oracle: submissions only apply to interactive mode");
    submitted_[index] = label;
  }

  void clear_submissions() { submitted_.clear(); }
  const LabelMap& submissions() const noexcept { return submitted_; }

  RevealResult reveal(std::span<const std::size_t> indices) const {
    LabelMap out;
    if (mode_ == Mode::simulated) {
      for (auto i : indices) {
        if (i >= hidden_.size()) throw ParameterError("oracle: index " + std::to_string(i) + " outside pool");
        out[i] = hidden_[i];
      }
      return out;
    }
    AwaitingLabels waiting;
    for (auto i : indices) {
      auto it = submitted_.find(i);
      if (it == submitted_.end()) {
        waiting.missing.push_back(i);
      } else {
        out[i] = it->second;
      }
    }
    if (!waiting.missing.empty()) return waiting;
    return out;
  }

 private:
  Oracle(Mode mode, std::vector<int> hidden) : mode_(mode), hidden_(std::move(hidden)) {}

  Mode mode_;
  std::vector<int> hidden_;
  LabelMap submitted_;
};

inline RevealResult reveal_labels(const Oracle& oracle, std::span<const std::size_t> indices) {
  return oracle.reveal(indices);
}

}  // namespace frugal
