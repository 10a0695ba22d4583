#include "ctrldiff/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ctrldiff/rng.hpp"

namespace ctrldiff::policy {

namespace {

bool vec_equal(const Vec& a, const Vec& b) {
  return a.size() == b.size() && (a.array() == b.array()).all();
}

std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Vec from_std(const std::vector<double>& v) {
  Vec out(static_cast<long>(v.size()));
  for (long i = 0; i < out.size(); ++i) out[i] = v[static_cast<std::size_t>(i)];
  return out;
}

WeightRow mix_row(const WeightRow& row, double eps) {
  const double uniform = 1.0 / static_cast<double>(row.size());
  WeightRow out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i)
    out[i] = (1.0 - eps) * row[i] + eps * uniform;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ActionGrid

long ActionGrid::size() const {
  long n = 1;
  for (const auto& v : values) n *= static_cast<long>(v.size());
  return n;
}

Vec ActionGrid::action(long index) const {
  if (index < 0 || index >= size())
    throw std::invalid_argument("ActionGrid: index out of range");
  Vec a(dims());
  for (int d = dims() - 1; d >= 0; --d) {
    const long n = static_cast<long>(values[d].size());
    a[d] = values[d][static_cast<std::size_t>(index % n)];
    index /= n;
  }
  return a;
}

long ActionGrid::flat_index(const std::vector<int>& per_dim) const {
  long idx = 0;
  for (int d = 0; d < dims(); ++d)
    idx = idx * static_cast<long>(values[d].size()) + per_dim[static_cast<std::size_t>(d)];
  return idx;
}

bool ActionGrid::operator==(const ActionGrid& other) const {
  return vec_equal(lo, other.lo) && vec_equal(hi, other.hi) && values == other.values;
}

ActionGrid quantize_actions(const Vec& lo, const Vec& hi, const std::vector<int>& levels) {
  const int dims = static_cast<int>(lo.size());
  if (hi.size() != dims || static_cast<int>(levels.size()) != dims)
    throw std::invalid_argument("quantize_actions: dimension mismatch");
  ActionGrid g;
  g.lo = lo;
  g.hi = hi;
  g.values.resize(static_cast<std::size_t>(dims));
  for (int d = 0; d < dims; ++d) {
    const int n = levels[static_cast<std::size_t>(d)];
    if (n < 1) throw std::invalid_argument("quantize_actions: levels >= 1 required");
    if (lo[d] > hi[d]) throw std::invalid_argument("quantize_actions: empty box");
    auto& vals = g.values[static_cast<std::size_t>(d)];
    if (n == 1) {
      vals.push_back(0.5 * (lo[d] + hi[d]));
    } else {
      if (!(lo[d] < hi[d]))
        throw std::invalid_argument("quantize_actions: degenerate box with levels >= 2");
      for (int i = 0; i < n; ++i)
        vals.push_back(lo[d] + (hi[d] - lo[d]) * static_cast<double>(i) / (n - 1));
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Rows

void check_row(const WeightRow& row, long n_actions) {
  if (static_cast<long>(row.size()) != n_actions)
    throw std::invalid_argument("weight row: wrong number of entries");
  double sum = 0.0;
  for (double w : row) {
    if (!(w >= 0.0)) throw std::invalid_argument("weight row: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12)
    throw std::invalid_argument("weight row: weights sum to " + std::to_string(sum));
}

int sample_row(const WeightRow& row, double u01) {
  double cum = 0.0;
  int last_positive = 0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i] > 0.0) last_positive = static_cast<int>(i);
    cum += row[i];
    if (u01 < cum) return static_cast<int>(i);
  }
  return last_positive;  // u01 fell past the (rounded) total mass
}

// ---------------------------------------------------------------------------
// StateCells

long StateCells::cell_count() const {
  long n = 1;
  for (int c : per_dim) n *= c;
  return n;
}

long StateCells::cell_of(const Vec& x, bool* clamped) const {
  if (clamped) *clamped = false;
  long idx = 0;
  for (int d = 0; d < dims(); ++d) {
    const int n = per_dim[static_cast<std::size_t>(d)];
    const double w = (hi[d] - lo[d]) / n;
    long i = static_cast<long>(std::floor((x[d] - lo[d]) / w));
    if (i < 0) {
      i = 0;
      if (clamped) *clamped = true;
    } else if (i >= n) {
      i = n - 1;
      if (clamped && x[d] > hi[d]) *clamped = true;
    }
    idx = idx * n + i;
  }
  return idx;
}

Vec StateCells::center(long cell) const {
  Vec c(dims());
  for (int d = dims() - 1; d >= 0; --d) {
    const int n = per_dim[static_cast<std::size_t>(d)];
    const long i = cell % n;
    const double w = (hi[d] - lo[d]) / n;
    c[d] = lo[d] + (static_cast<double>(i) + 0.5) * w;
    cell /= n;
  }
  return c;
}

bool StateCells::operator==(const StateCells& other) const {
  return vec_equal(lo, other.lo) && vec_equal(hi, other.hi) && per_dim == other.per_dim;
}

// ---------------------------------------------------------------------------
// ObservationQuantizer

long ObservationQuantizer::codes_per_sample() const {
  long n = 1;
  for (int d = 0; d < obs_dim(); ++d) n *= levels;
  return n;
}

long ObservationQuantizer::code_of(const Vec& y) const {
  long code = 0;
  long base = 1;
  for (int d = 0; d < obs_dim(); ++d) {
    const double w = (hi[d] - lo[d]) / levels;
    long i = static_cast<long>(std::floor((y[d] - lo[d]) / w));
    i = std::clamp<long>(i, 0, levels - 1);
    code += i * base;
    base *= levels;
  }
  return code;
}

bool ObservationQuantizer::operator==(const ObservationQuantizer& other) const {
  return vec_equal(lo, other.lo) && vec_equal(hi, other.hi) && levels == other.levels;
}

// ---------------------------------------------------------------------------
// sample_action

int sample_action(const DiscretePolicy& p, int k, const Information& info, double u01,
                  bool* clamped) {
  const long key = p.key_of(k, info, clamped);
  return sample_row(p.row(k, key), u01);
}

// ---------------------------------------------------------------------------
// OpenLoopPolicy

OpenLoopPolicy::OpenLoopPolicy(ActionGrid grid, std::vector<WeightRow> rows)
    : grid_(std::move(grid)), rows_(std::move(rows)) {
  for (const auto& r : rows_) check_row(r, grid_.size());
}

OpenLoopPolicy OpenLoopPolicy::constant(ActionGrid grid, int steps, long index) {
  WeightRow row(static_cast<std::size_t>(grid.size()), 0.0);
  row.at(static_cast<std::size_t>(index)) = 1.0;
  return OpenLoopPolicy(std::move(grid), std::vector<WeightRow>(static_cast<std::size_t>(steps), row));
}

const WeightRow& OpenLoopPolicy::row(int k, long key) const {
  if (key != 0 || k < 0 || k >= steps())
    throw std::invalid_argument("open_loop: missing row (k=" + std::to_string(k) +
                                ", key=" + std::to_string(key) + ")");
  return rows_[static_cast<std::size_t>(k)];
}

std::shared_ptr<DiscretePolicy> OpenLoopPolicy::perturbed(double eps) const {
  std::vector<WeightRow> rows;
  rows.reserve(rows_.size());
  for (const auto& r : rows_) rows.push_back(mix_row(r, eps));
  return std::make_shared<OpenLoopPolicy>(grid_, std::move(rows));
}

// ---------------------------------------------------------------------------
// MarkovTablePolicy

MarkovTablePolicy::MarkovTablePolicy(ActionGrid grid, StateCells cells,
                                     std::vector<std::vector<WeightRow>> rows)
    : grid_(std::move(grid)), cells_(std::move(cells)), rows_(std::move(rows)) {
  for (const auto& per_cell : rows_) {
    if (static_cast<long>(per_cell.size()) != cells_.cell_count())
      throw std::invalid_argument("markov_table: a (k, cell) row is missing");
    for (const auto& r : per_cell) check_row(r, grid_.size());
  }
}

long MarkovTablePolicy::key_of(int k, const Information& info, bool* clamped) const {
  (void)k;
  if (info.state == nullptr)
    throw std::invalid_argument("markov_table: state information required");
  return cells_.cell_of(*info.state, clamped);
}

const WeightRow& MarkovTablePolicy::row(int k, long key) const {
  if (k < 0 || k >= steps() || key < 0 || key >= cells_.cell_count())
    throw std::invalid_argument("markov_table: missing row (k=" + std::to_string(k) +
                                ", key=" + std::to_string(key) + ")");
  return rows_[static_cast<std::size_t>(k)][static_cast<std::size_t>(key)];
}

std::shared_ptr<DiscretePolicy> MarkovTablePolicy::perturbed(double eps) const {
  auto rows = rows_;
  for (auto& per_cell : rows)
    for (auto& r : per_cell) r = mix_row(r, eps);
  return std::make_shared<MarkovTablePolicy>(grid_, cells_, std::move(rows));
}

// ---------------------------------------------------------------------------
// WideSensePolicy

WideSensePolicy::WideSensePolicy(ActionGrid grid, ObservationQuantizer quantizer,
                                 int history_len,
                                 std::vector<std::map<long, WeightRow>> rows)
    : grid_(std::move(grid)),
      quantizer_(std::move(quantizer)),
      history_len_(history_len),
      rows_(std::move(rows)) {
  if (history_len_ < 1) throw std::invalid_argument("wide_sense: history_len >= 1");
  for (const auto& per_key : rows_)
    for (const auto& [key, r] : per_key) check_row(r, grid_.size());
}

int WideSensePolicy::samples_used(int k) const { return std::min(k + 1, history_len_); }

long WideSensePolicy::key_space(int k) const {
  long n = 1;
  for (int i = 0; i < samples_used(k); ++i) n *= quantizer_.codes_per_sample();
  return n;
}

long WideSensePolicy::key_of(int k, const Information& info, bool*) const {
  if (info.y_samples == nullptr)
    throw std::invalid_argument("wide_sense: observation samples required");
  const auto& ys = *info.y_samples;
  if (static_cast<int>(ys.size()) < k + 1)
    throw std::invalid_argument("wide_sense: need samples up to index k");
  // Only samples with index <= k enter the key; the code cannot anticipate.
  const int used = samples_used(k);
  long code = 0;
  long base = 1;
  for (int i = 0; i < used; ++i) {
    const int sample_index = k - used + 1 + i;
    code += quantizer_.code_of(ys[static_cast<std::size_t>(sample_index)]) * base;
    base *= quantizer_.codes_per_sample();
  }
  return code;
}

const WeightRow& WideSensePolicy::row(int k, long key) const {
  if (k < 0 || k >= steps())
    throw std::invalid_argument("wide_sense: missing row (k=" + std::to_string(k) +
                                ", key=" + std::to_string(key) + ")");
  const auto& per_key = rows_[static_cast<std::size_t>(k)];
  const auto it = per_key.find(key);
  if (it == per_key.end())
    throw std::invalid_argument("wide_sense: missing row (k=" + std::to_string(k) +
                                ", key=" + std::to_string(key) + ")");
  return it->second;
}

std::shared_ptr<DiscretePolicy> WideSensePolicy::perturbed(double eps) const {
  auto rows = rows_;
  for (auto& per_key : rows)
    for (auto& [key, r] : per_key) r = mix_row(r, eps);
  return std::make_shared<WideSensePolicy>(grid_, quantizer_, history_len_, std::move(rows));
}

// ---------------------------------------------------------------------------
// InterpolatedPolicy

InterpolatedPolicy::InterpolatedPolicy(std::shared_ptr<const DiscretePolicy> base,
                                       TimeGrid grid)
    : base_(std::move(base)), grid_(grid) {
  if (!base_) throw std::invalid_argument("interpolate: null policy");
  if (base_->steps() < grid_.macro_steps)
    throw std::invalid_argument("interpolate: policy covers " +
                                std::to_string(base_->steps()) + " steps, grid needs " +
                                std::to_string(grid_.macro_steps));
}

InterpolatedPolicy::PathDraws InterpolatedPolicy::new_draws() const {
  PathDraws d;
  d.index.assign(static_cast<std::size_t>(grid_.macro_steps), -1);
  return d;
}

int InterpolatedPolicy::step_index(int k, const Information& info, PathDraws& draws,
                                   std::uint64_t seed, long path, bool* clamped) const {
  if (k < 0 || k >= grid_.macro_steps)
    throw std::invalid_argument("interpolated policy: step out of range");
  int& slot = draws.index[static_cast<std::size_t>(k)];
  if (slot < 0) {
    // Dedicated policy randomization stream; never the Brownian stream.
    const double u = rng::uniform01(seed, rng::Stream::policy,
                                    static_cast<std::uint64_t>(path),
                                    static_cast<std::uint64_t>(k),
                                    static_cast<std::uint64_t>(info.agent));
    slot = sample_action(*base_, k, info, u, clamped);
  }
  return slot;
}

Vec InterpolatedPolicy::action_at(double t, const Information& info, PathDraws& draws,
                                  std::uint64_t seed, long path) const {
  int k = static_cast<int>(std::floor(t / grid_.h()));
  k = std::clamp(k, 0, grid_.macro_steps - 1);
  return base_->actions().action(step_index(k, info, draws, seed, path));
}

InterpolatedPolicy interpolate(std::shared_ptr<const DiscretePolicy> base, TimeGrid grid) {
  return InterpolatedPolicy(std::move(base), grid);
}

std::shared_ptr<DiscretePolicy> perturb_policy(const DiscretePolicy& p, double eps) {
  if (eps < 0.0 || eps > 1.0) throw std::invalid_argument("perturb_policy: eps in [0,1]");
  return p.perturbed(eps);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

using nlohmann::json;

json grid_to_json(const ActionGrid& g) {
  return json{{"lo", to_std(g.lo)}, {"hi", to_std(g.hi)}, {"values", g.values}};
}

ActionGrid grid_from_json(const json& j) {
  ActionGrid g;
  g.lo = from_std(j.at("lo").get<std::vector<double>>());
  g.hi = from_std(j.at("hi").get<std::vector<double>>());
  g.values = j.at("values").get<std::vector<std::vector<double>>>();
  return g;
}

}  // namespace

std::string to_text(const DiscretePolicy& p) {
  json j;
  j["format"] = "ctrldiff-policy";
  j["type"] = p.type_name();
  j["action_grid"] = grid_to_json(p.actions());
  if (const auto* ol = dynamic_cast<const OpenLoopPolicy*>(&p)) {
    j["rows"] = ol->rows();
  } else if (const auto* mt = dynamic_cast<const MarkovTablePolicy*>(&p)) {
    j["cells"] = json{{"lo", to_std(mt->cells().lo)},
                      {"hi", to_std(mt->cells().hi)},
                      {"per_dim", mt->cells().per_dim}};
    j["rows"] = mt->rows();
  } else if (const auto* ws = dynamic_cast<const WideSensePolicy*>(&p)) {
    j["quantizer"] = json{{"lo", to_std(ws->quantizer().lo)},
                          {"hi", to_std(ws->quantizer().hi)},
                          {"levels", ws->quantizer().levels}};
    j["history_len"] = ws->history_len();
    json rows = json::array();
    for (const auto& per_key : ws->rows()) {
      json step = json::array();
      for (const auto& [key, row] : per_key) step.push_back(json::array({key, row}));
      rows.push_back(std::move(step));
    }
    j["rows"] = std::move(rows);
  } else {
    throw std::invalid_argument("to_text: unknown policy type " + p.type_name());
  }
  return j.dump(2);
}

std::shared_ptr<DiscretePolicy> from_text(const std::string& text) {
  const json j = json::parse(text);
  if (j.at("format").get<std::string>() != "ctrldiff-policy")
    throw std::invalid_argument("from_text: not a policy file");
  const std::string type = j.at("type").get<std::string>();
  ActionGrid grid = grid_from_json(j.at("action_grid"));
  if (type == "open_loop") {
    return std::make_shared<OpenLoopPolicy>(std::move(grid),
                                            j.at("rows").get<std::vector<WeightRow>>());
  }
  if (type == "markov_table") {
    StateCells cells;
    cells.lo = from_std(j.at("cells").at("lo").get<std::vector<double>>());
    cells.hi = from_std(j.at("cells").at("hi").get<std::vector<double>>());
    cells.per_dim = j.at("cells").at("per_dim").get<std::vector<int>>();
    return std::make_shared<MarkovTablePolicy>(
        std::move(grid), std::move(cells),
        j.at("rows").get<std::vector<std::vector<WeightRow>>>());
  }
  if (type == "wide_sense") {
    ObservationQuantizer q;
    q.lo = from_std(j.at("quantizer").at("lo").get<std::vector<double>>());
    q.hi = from_std(j.at("quantizer").at("hi").get<std::vector<double>>());
    q.levels = j.at("quantizer").at("levels").get<int>();
    std::vector<std::map<long, WeightRow>> rows;
    for (const auto& step : j.at("rows")) {
      std::map<long, WeightRow> per_key;
      for (const auto& entry : step)
        per_key.emplace(entry.at(0).get<long>(), entry.at(1).get<WeightRow>());
      rows.push_back(std::move(per_key));
    }
    return std::make_shared<WideSensePolicy>(std::move(grid), std::move(q),
                                             j.at("history_len").get<int>(), std::move(rows));
  }
  throw std::invalid_argument("from_text: unknown policy type " + type);
}

void save_policy(const DiscretePolicy& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_policy: cannot open " + path);
  out << to_text(p) << "\n";
}

std::shared_ptr<DiscretePolicy> load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_policy: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace ctrldiff::policy
