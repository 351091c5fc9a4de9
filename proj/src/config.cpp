#include "sphereopt/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "sphereopt/equivalence.hpp"

namespace sphereopt {

const char* experiment_kind_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Train: return "train";
    case ExperimentKind::Diagnose: return "diagnose";
    case ExperimentKind::Equivalence: return "equivalence";
    case ExperimentKind::OrderStudy: return "order_study";
    case ExperimentKind::Sweep: return "sweep";
  }
  throw ValidationError("unknown experiment kind", 0);
}

ExperimentKind experiment_kind_from_name(const std::string& name, int line) {
  for (auto k : {ExperimentKind::Train, ExperimentKind::Diagnose, ExperimentKind::Equivalence,
                 ExperimentKind::OrderStudy, ExperimentKind::Sweep})
    if (name == experiment_kind_name(k)) return k;
  throw ValidationError("unknown experiment kind '" + name + "'", line);
}

double ScheduleSpec::eta_at(const SchemeSpec& scheme, long k) const {
  switch (kind) {
    case Kind::Constant:
      return scheme.eta;
    case Kind::StepDecay: {
      double eta = scheme.eta;
      for (long m : milestones)
        if (k >= m) eta *= factor;
      return eta;
    }
    case Kind::ExpLr:
      return explr_schedule(scheme.eta, scheme.lambda, k);
  }
  throw ValidationError("unknown schedule kind", 0);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

struct Entry {
  std::string value;
  int line = 0;
};

// section -> key -> entry (last occurrence wins)
using Sections = std::map<std::string, std::map<std::string, Entry>>;

Sections tokenize(const std::string& text, std::vector<ConfigWarning>& warnings) {
  Sections sections;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ParseError("unterminated section header", line_no);
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ParseError("empty section name", line_no);
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    if (section.empty()) throw ParseError("key outside of any [section]", line_no);
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line_no);
    auto& slot = sections[section][key];
    if (slot.line != 0)
      warnings.push_back({line_no, "duplicate key '" + section + "." + key +
                                       "' overrides line " + std::to_string(slot.line)});
    slot = Entry{value, line_no};
  }
  return sections;
}

class SectionReader {
 public:
  SectionReader(Sections& sections, std::string name) : name_(std::move(name)) {
    auto it = sections.find(name_);
    if (it != sections.end()) entries_ = &it->second;
  }

  bool present() const { return entries_ != nullptr; }

  const Entry* find(const std::string& key) {
    if (!entries_) return nullptr;
    auto it = entries_->find(key);
    if (it == entries_->end()) return nullptr;
    consumed_.push_back(key);
    return &it->second;
  }

  double number(const std::string& key, double fallback) {
    const Entry* e = find(key);
    if (!e) return fallback;
    return parse_double(*e, key);
  }

  long integer(const std::string& key, long fallback) {
    const Entry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t used = 0;
      long v = std::stol(e->value, &used);
      if (used != e->value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "' expects an integer, got '" + e->value + "'",
                            e->line);
    }
  }

  // Full 64-bit range (seeds).
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    const Entry* e = find(key);
    if (!e) return fallback;
    try {
      std::size_t used = 0;
      std::uint64_t v = std::stoull(e->value, &used);
      if (used != e->value.size() || e->value[0] == '-') throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "' expects an unsigned integer, got '" + e->value +
                                "'",
                            e->line);
    }
  }

  bool boolean(const std::string& key, bool fallback) {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->value == "true" || e->value == "1") return true;
    if (e->value == "false" || e->value == "0") return false;
    throw ValidationError("key '" + key + "' expects true/false", e->line);
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const Entry* e = find(key);
    return e ? e->value : fallback;
  }

  std::vector<double> number_list(const std::string& key) {
    const Entry* e = find(key);
    std::vector<double> out;
    if (!e) return out;
    std::stringstream ss(e->value);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(parse_double(Entry{trim(cell), e->line}, key));
    if (out.empty()) throw ValidationError("key '" + key + "' expects a list", e->line);
    return out;
  }

  std::vector<long> integer_list(const std::string& key) {
    std::vector<long> out;
    for (double v : number_list(key)) out.push_back(std::lround(v));
    return out;
  }

  int line_of(const std::string& key) const {
    if (!entries_) return 0;
    auto it = entries_->find(key);
    return it == entries_->end() ? 0 : it->second.line;
  }

  // Every key must have been consumed by now.
  void finish() const {
    if (!entries_) return;
    for (const auto& [key, entry] : *entries_)
      if (std::find(consumed_.begin(), consumed_.end(), key) == consumed_.end())
        throw UnknownKey("unknown key '" + name_ + "." + key + "'", entry.line);
  }

 private:
  static double parse_double(const Entry& e, const std::string& key) {
    try {
      std::size_t used = 0;
      double v = std::stod(e.value, &used);
      if (used != e.value.size()) throw std::invalid_argument("");
      return v;
    } catch (const std::exception&) {
      throw ValidationError("key '" + key + "' expects a number, got '" + e.value + "'", e.line);
    }
  }

  std::string name_;
  std::map<std::string, Entry>* entries_ = nullptr;
  std::vector<std::string> consumed_;
};

void require_positive(double v, const std::string& key, int line) {
  if (!(v > 0.0)) throw ValidationError("key '" + key + "' must be > 0", line);
}

void require_non_negative(double v, const std::string& key, int line) {
  if (v < 0.0) throw ValidationError("key '" + key + "' must be >= 0", line);
}

void read_scheme(SectionReader& sec, SchemeSpec& scheme) {
  const Entry* variant = sec.find("variant");
  if (variant) {
    try {
      scheme.variant = variant_from_name(variant->value);
    } catch (const UnknownVariant&) {
      throw ValidationError("unknown variant '" + variant->value + "'", variant->line);
    }
  }
  scheme.eta = sec.number("eta", scheme.eta);
  require_positive(scheme.eta, "eta", sec.line_of("eta"));
  scheme.beta1 = sec.number("beta1", scheme.beta1);
  scheme.beta2 = sec.number("beta2", scheme.beta2);
  for (auto [v, key] : {std::pair{scheme.beta1, "beta1"}, std::pair{scheme.beta2, "beta2"}})
    if (!(v >= 0.0 && v < 1.0))
      throw ValidationError(std::string("key '") + key + "' must be in [0,1)", sec.line_of(key));
  scheme.lambda = sec.number("lambda", scheme.lambda);
  require_non_negative(scheme.lambda, "lambda", sec.line_of("lambda"));
  scheme.epsilon = sec.number("epsilon", scheme.epsilon);
  require_non_negative(scheme.epsilon, "epsilon", sec.line_of("epsilon"));
  scheme.v0 = sec.number("v0", scheme.v0);
  require_non_negative(scheme.v0, "v0", sec.line_of("v0"));
}

void read_schedule(SectionReader& sec, ScheduleSpec& schedule) {
  const Entry* kind = sec.find("kind");
  if (kind) {
    if (kind->value == "constant")
      schedule.kind = ScheduleSpec::Kind::Constant;
    else if (kind->value == "step_decay")
      schedule.kind = ScheduleSpec::Kind::StepDecay;
    else if (kind->value == "explr")
      schedule.kind = ScheduleSpec::Kind::ExpLr;
    else
      throw ValidationError("unknown schedule kind '" + kind->value + "'", kind->line);
  }
  if (sec.line_of("milestones") != 0) schedule.milestones = sec.integer_list("milestones");
  schedule.factor = sec.number("factor", schedule.factor);
  require_positive(schedule.factor, "factor", sec.line_of("factor"));
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  Sections sections = tokenize(text, cfg.warnings);

  for (const auto& [name, entries] : sections) {
    static const char* known[] = {"experiment", "model",      "data",     "scheme",
                                  "scheme_b",   "schedule",   "schedule_b", "order_study",
                                  "sweep"};
    if (std::find_if(std::begin(known), std::end(known),
                     [&name = name](const char* k) { return name == k; }) == std::end(known))
      throw UnknownKey("unknown section '[" + name + "]'", entries.begin()->second.line);
  }

  SectionReader experiment(sections, "experiment");
  const Entry* kind = experiment.find("kind");
  if (!kind) throw ValidationError("missing experiment.kind", 0);
  cfg.kind = experiment_kind_from_name(kind->value, kind->line);
  cfg.seed = experiment.unsigned_integer("seed", 0);
  cfg.steps = experiment.integer("steps", cfg.steps);
  if (cfg.steps < 1) throw ValidationError("key 'steps' must be >= 1", experiment.line_of("steps"));
  cfg.epochs = experiment.integer("epochs", cfg.epochs);
  if (cfg.epochs < 1)
    throw ValidationError("key 'epochs' must be >= 1", experiment.line_of("epochs"));
  cfg.strict_assumptions = experiment.boolean("strict_assumptions", false);
  cfg.r0 = experiment.number("r0", cfg.r0);
  require_positive(cfg.r0, "r0", experiment.line_of("r0"));
  cfg.r0_b = experiment.number("r0_b", cfg.r0_b);
  require_positive(cfg.r0_b, "r0_b", experiment.line_of("r0_b"));
  experiment.finish();

  SectionReader model(sections, "model");
  const std::string loss = model.text("loss", "mlp");
  if (loss == "toy")
    cfg.model.toy = true;
  else if (loss != "mlp")
    throw ValidationError("key 'loss' must be toy or mlp", model.line_of("loss"));
  cfg.model.toy_dim = static_cast<std::size_t>(model.integer("toy_dim", 8));
  if (cfg.model.toy_dim < 2)
    throw ValidationError("key 'toy_dim' must be >= 2", model.line_of("toy_dim"));
  if (model.line_of("layer_widths") != 0) {
    cfg.model.layer_widths.clear();
    for (long w : model.integer_list("layer_widths")) {
      if (w < 1)
        throw ValidationError("layer widths must be >= 1", model.line_of("layer_widths"));
      cfg.model.layer_widths.push_back(static_cast<std::size_t>(w));
    }
    if (cfg.model.layer_widths.size() < 3)
      throw ValidationError("layer_widths needs input, hidden..., output",
                            model.line_of("layer_widths"));
  }
  cfg.model.bn_epsilon = model.number("bn_epsilon", 0.0);
  require_non_negative(cfg.model.bn_epsilon, "bn_epsilon", model.line_of("bn_epsilon"));
  cfg.model.affine = model.boolean("affine", false);
  model.finish();

  SectionReader data(sections, "data");
  const std::string data_kind = data.text("kind", "two_gaussians");
  if (data_kind == "two_gaussians")
    cfg.data.kind = DatasetKind::TwoGaussians;
  else if (data_kind == "rings")
    cfg.data.kind = DatasetKind::Rings;
  else
    throw ValidationError("unknown dataset kind '" + data_kind + "'", data.line_of("kind"));
  cfg.data.n = static_cast<std::size_t>(data.integer("n", 128));
  if (cfg.data.n < 4) throw ValidationError("key 'n' must be >= 4", data.line_of("n"));
  cfg.data.batch_size = static_cast<std::size_t>(data.integer("batch_size", 32));
  if (cfg.data.batch_size < 2)
    throw ValidationError("key 'batch_size' must be >= 2", data.line_of("batch_size"));
  cfg.data.csv_path = data.text("csv_path", "");
  cfg.data.export_csv = data.boolean("export_csv", false);
  data.finish();

  SectionReader scheme(sections, "scheme");
  read_scheme(scheme, cfg.scheme);
  scheme.finish();

  SectionReader scheme_b(sections, "scheme_b");
  cfg.has_scheme_b = scheme_b.present();
  if (cfg.has_scheme_b) {
    const std::string derive = scheme_b.text("derive", "none");
    if (derive == "sgd_equivalent") {
      cfg.derive_sgd_equivalent = true;
      cfg.scheme_b.variant = Variant::AdamGStar;
    } else if (derive != "none") {
      throw ValidationError("key 'derive' must be none or sgd_equivalent", scheme_b.line_of("derive"));
    }
    read_scheme(scheme_b, cfg.scheme_b);
    scheme_b.finish();
  }
  if ((cfg.kind == ExperimentKind::Equivalence) && !cfg.has_scheme_b)
    throw ValidationError("equivalence experiments need a [scheme_b] section", 0);

  SectionReader schedule(sections, "schedule");
  read_schedule(schedule, cfg.schedule);
  schedule.finish();
  SectionReader schedule_b(sections, "schedule_b");
  read_schedule(schedule_b, cfg.schedule_b);
  schedule_b.finish();

  SectionReader order(sections, "order_study");
  cfg.halvings = static_cast<int>(order.integer("halvings", cfg.halvings));
  if (cfg.halvings < 2)
    throw ValidationError("key 'halvings' must be >= 2", order.line_of("halvings"));
  cfg.horizon = order.number("horizon", cfg.horizon);
  require_positive(cfg.horizon, "horizon", order.line_of("horizon"));
  order.finish();

  SectionReader sweep(sections, "sweep");
  cfg.eta_grid = sweep.number_list("eta_grid");
  cfg.lambda_grid = sweep.number_list("lambda_grid");
  cfg.beta2_grid = sweep.number_list("beta2_grid");
  for (double v : cfg.eta_grid) require_positive(v, "eta_grid", sweep.line_of("eta_grid"));
  for (double v : cfg.lambda_grid)
    require_non_negative(v, "lambda_grid", sweep.line_of("lambda_grid"));
  for (double v : cfg.beta2_grid)
    if (!(v >= 0.0 && v < 1.0))
      throw ValidationError("beta2_grid values must be in [0,1)", sweep.line_of("beta2_grid"));
  sweep.finish();
  if (cfg.kind == ExperimentKind::Sweep && cfg.eta_grid.empty())
    throw ValidationError("sweep experiments need sweep.eta_grid", 0);

  return cfg;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void echo_scheme(std::ostringstream& out, const char* section, const SchemeSpec& s) {
  out << "[" << section << "]\n";
  out << "variant = " << variant_name(s.variant) << "\n";
  out << "eta = " << fmt(s.eta) << "\n";
  out << "beta1 = " << fmt(s.beta1) << "\n";
  out << "beta2 = " << fmt(s.beta2) << "\n";
  out << "lambda = " << fmt(s.lambda) << "\n";
  out << "epsilon = " << fmt(s.epsilon) << "\n";
  out << "v0 = " << fmt(s.v0) << "\n";
}

void echo_schedule(std::ostringstream& out, const char* section, const ScheduleSpec& s) {
  out << "[" << section << "]\n";
  out << "kind = "
      << (s.kind == ScheduleSpec::Kind::Constant
              ? "constant"
              : s.kind == ScheduleSpec::Kind::StepDecay ? "step_decay" : "explr")
      << "\n";
  if (!s.milestones.empty()) {
    out << "milestones = ";
    for (std::size_t i = 0; i < s.milestones.size(); ++i)
      out << (i ? "," : "") << s.milestones[i];
    out << "\n";
  }
  out << "factor = " << fmt(s.factor) << "\n";
}

}  // namespace

std::string echo_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "[experiment]\n";
  out << "kind = " << experiment_kind_name(cfg.kind) << "\n";
  out << "seed = " << cfg.seed << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "strict_assumptions = " << (cfg.strict_assumptions ? "true" : "false") << "\n";
  out << "r0 = " << fmt(cfg.r0) << "\n";
  out << "r0_b = " << fmt(cfg.r0_b) << "\n";
  out << "[model]\n";
  out << "loss = " << (cfg.model.toy ? "toy" : "mlp") << "\n";
  out << "toy_dim = " << cfg.model.toy_dim << "\n";
  out << "layer_widths = ";
  for (std::size_t i = 0; i < cfg.model.layer_widths.size(); ++i)
    out << (i ? "," : "") << cfg.model.layer_widths[i];
  out << "\n";
  out << "bn_epsilon = " << fmt(cfg.model.bn_epsilon) << "\n";
  out << "affine = " << (cfg.model.affine ? "true" : "false") << "\n";
  out << "[data]\n";
  out << "kind = " << (cfg.data.kind == DatasetKind::TwoGaussians ? "two_gaussians" : "rings")
      << "\n";
  out << "n = " << cfg.data.n << "\n";
  out << "batch_size = " << cfg.data.batch_size << "\n";
  if (!cfg.data.csv_path.empty()) out << "csv_path = " << cfg.data.csv_path << "\n";
  out << "export_csv = " << (cfg.data.export_csv ? "true" : "false") << "\n";
  echo_scheme(out, "scheme", cfg.scheme);
  if (cfg.has_scheme_b) {
    echo_scheme(out, "scheme_b", cfg.scheme_b);
    if (cfg.derive_sgd_equivalent) out << "derive = sgd_equivalent\n";
  }
  echo_schedule(out, "schedule", cfg.schedule);
  echo_schedule(out, "schedule_b", cfg.schedule_b);
  out << "[order_study]\n";
  out << "halvings = " << cfg.halvings << "\n";
  out << "horizon = " << fmt(cfg.horizon) << "\n";
  if (!cfg.eta_grid.empty()) {
    out << "[sweep]\n";
    auto list = [&out](const char* key, const std::vector<double>& v) {
      out << key << " = ";
      for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << fmt(v[i]);
      out << "\n";
    };
    list("eta_grid", cfg.eta_grid);
    list("lambda_grid", cfg.lambda_grid);
    list("beta2_grid", cfg.beta2_grid);
  }
  return out.str();
}

}  // namespace sphereopt
