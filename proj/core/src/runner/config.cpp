#include "lwf/runner/config.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

namespace lwf::runner {

using nlohmann::json;

std::string_view to_string(DataSource s) noexcept {
  switch (s) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::cifar100: return "cifar100";
    case DataSource::archive: return "archive";
  }
  return "?";
}

std::string_view to_string(Precision p) noexcept { return p == Precision::f32 ? "f32" : "f64"; }

namespace {

std::string describe(const json& j) {
  switch (j.type()) {
    case json::value_t::null: return "null";
    case json::value_t::boolean: return "a boolean";
    case json::value_t::string: return "a string";
    case json::value_t::array: return "an array";
    case json::value_t::object: return "an object";
    default: return "a number";
  }
}

/// Typed access to one JSON object that rejects unknown keys on finish().
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    require(j.is_object(), ErrorKind::config, where() + " must be an object, got " + describe(j));
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  Section section(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, field(key));
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_number(), ErrorKind::config, field(key) + " must be a number, got " + describe(v));
    return v.get<double>();
  }

  std::uint64_t integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return as_integer(j_.at(key), field(key));
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_boolean(), ErrorKind::config, field(key) + " must be true or false, got " + describe(v));
    return v.get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_string(), ErrorKind::config, field(key) + " must be a string, got " + describe(v));
    return v.get<std::string>();
  }

  std::vector<std::uint64_t> integers(const std::string& key, std::vector<std::uint64_t> fallback) {
    if (!has(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_array(), ErrorKind::config, field(key) + " must be an array, got " + describe(v));
    std::vector<std::uint64_t> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_integer(v[i], field(key) + "[" + std::to_string(i) + "]"));
    return out;
  }

  void finish() const {
    for (const auto& [k, _] : j_.items())
      require(seen_.count(k) > 0, ErrorKind::config, "unknown key " + field(k));
  }

  const std::string& path() const { return path_; }

 private:
  static std::uint64_t as_integer(const json& v, const std::string& where) {
    require(v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>())),
            ErrorKind::config, where + " must be an integer, got " + describe(v));
    if (v.is_number_float()) {
      require(v.get<double>() >= 0.0, ErrorKind::config, where + " must be >= 0");
      return static_cast<std::uint64_t>(v.get<double>());
    }
    require(v.is_number_unsigned() || v.get<std::int64_t>() >= 0, ErrorKind::config, where + " must be >= 0");
    return v.get<std::uint64_t>();
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename F>
void with_path(const std::string& path, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config && std::string(e.what()).find(path) != std::string::npos) throw;
    fail(ErrorKind::config, path + ": " + e.what());
  }
}

void parse_dataset(Section s, DatasetConfig& d) {
  const auto source = s.string("source", "synthetic");
  if (source == "synthetic") {
    d.source = DataSource::synthetic;
    d.synth.n_classes = s.integer("classes", d.synth.n_classes);
    d.synth.per_class = s.integer("train_per_class", d.synth.per_class);
    d.synth_test_per_class = s.integer("test_per_class", d.synth_test_per_class);
    d.synth.image_size = s.integer("image_size", d.synth.image_size);
    d.synth.separation = s.number("separation", d.synth.separation);
    if (s.has("seed")) d.synth_seed = s.integer("seed", 0);
    require(d.synth.n_classes >= 2, ErrorKind::config, s.field("classes") + " must be >= 2");
    require(d.synth.per_class >= 2, ErrorKind::config, s.field("train_per_class") + " must be >= 2");
    require(d.synth_test_per_class >= 1, ErrorKind::config, s.field("test_per_class") + " must be >= 1");
    require(d.synth.image_size >= 1, ErrorKind::config, s.field("image_size") + " must be >= 1");
    require(d.synth.separation > 0.0, ErrorKind::config, s.field("separation") + " must be positive");
  } else if (source == "cifar100" || source == "archive") {
    d.source = source == "cifar100" ? DataSource::cifar100 : DataSource::archive;
    d.train_path = s.string("train", "");
    d.test_path = s.string("test", "");
    require(!d.train_path.empty(), ErrorKind::config, s.field("train") + " is required for " + source);
    require(!d.test_path.empty(), ErrorKind::config, s.field("test") + " is required for " + source);
  } else {
    fail(ErrorKind::config, s.field("source") + ": unknown source '" + source + "' (expected synthetic, cifar100 or archive)");
  }
  s.finish();
}

void parse_architecture(Section s, ArchitectureConfig& a) {
  a.name = s.string("name", a.name);
  if (a.name == "resnet") {
    a.blocks_per_group = s.integer("blocks_per_group", a.blocks_per_group);
    a.width = s.integer("width", a.width);
    require(a.blocks_per_group >= 1, ErrorKind::config, s.field("blocks_per_group") + " must be >= 1");
    require(a.width >= 1, ErrorKind::config, s.field("width") + " must be >= 1");
  } else if (a.name == "alexnet") {
    auto& o = a.alexnet;
    o.dropout = s.boolean("dropout", o.dropout);
    auto to_sizes = [](const std::vector<std::uint64_t>& v) { return std::vector<std::size_t>(v.begin(), v.end()); };
    o.filters = to_sizes(s.integers("filters", {o.filters.begin(), o.filters.end()}));
    o.kernels = to_sizes(s.integers("kernels", {o.kernels.begin(), o.kernels.end()}));
    o.paddings = to_sizes(s.integers("paddings", {o.paddings.begin(), o.paddings.end()}));
    o.fc_units = s.integer("fc_units", o.fc_units);
    o.conv_dropout = s.number("conv_dropout", o.conv_dropout);
    o.late_dropout = s.number("late_dropout", o.late_dropout);
    require(o.filters.size() == 3 && o.kernels.size() == 3 && o.paddings.size() == 3, ErrorKind::config,
            s.field("filters") + ", kernels and paddings need three entries each");
    require(o.fc_units >= 1, ErrorKind::config, s.field("fc_units") + " must be >= 1");
  } else {
    static const std::set<std::string> named{"alexnet-d", "alexnet-nd", "rn-20", "rn-32", "rn-62", "wrn-20-w2", "wrn-20-w5"};
    require(named.count(a.name) > 0, ErrorKind::config,
            s.field("name") + ": unknown architecture '" + a.name +
                "' (expected resnet, alexnet, alexnet-d, alexnet-nd, rn-20, rn-32, rn-62, wrn-20-w2 or wrn-20-w5)");
  }
  s.finish();
}

void parse_strategy(Section s, strategies::StrategyConfig& c) {
  with_path(s.field("name"), [&] { c.kind = strategies::parse_strategy(s.string("name", "lwf")); });
  c.theta = s.number("theta", c.theta);
  c.distill_weight = s.number("distill_weight", c.distill_weight);
  c.ewc_lambda = s.number("lambda", c.ewc_lambda);
  c.ewc_gamma = s.number("gamma", c.ewc_gamma);
  c.fisher_samples = s.integer("fisher_samples", c.fisher_samples);
  with_path(s.field("imm_mode"), [&] { c.imm_mode = strategies::parse_imm_mode(s.string("imm_mode", "mean")); });
  c.imm_l2 = s.number("imm_l2", c.imm_l2);
  with_path(s.path(), [&] { c.validate(); });
  s.finish();
}

void parse_augmentation(Section s, data::AugPolicy& p) {
  p.enabled = s.boolean("enabled", p.enabled);
  p.max_translate_px = static_cast<int>(s.integer("max_translate_px", static_cast<std::uint64_t>(p.max_translate_px)));
  p.vertical_translate = s.boolean("vertical_translate", p.vertical_translate);
  p.hflip_prob = s.number("hflip_prob", p.hflip_prob);
  p.brightness = s.number("brightness", p.brightness);
  p.contrast = s.number("contrast", p.contrast);
  p.saturation = s.number("saturation", p.saturation);
  p.hue = s.number("hue", p.hue);
  s.finish();
}

json arch_json(const ArchitectureConfig& a) {
  json j{{"name", a.name}};
  if (a.name == "resnet") {
    j["blocks_per_group"] = a.blocks_per_group;
    j["width"] = a.width;
  } else if (a.name == "alexnet") {
    const auto& o = a.alexnet;
    j["dropout"] = o.dropout;
    j["filters"] = o.filters;
    j["kernels"] = o.kernels;
    j["paddings"] = o.paddings;
    j["fc_units"] = o.fc_units;
    j["conv_dropout"] = o.conv_dropout;
    j["late_dropout"] = o.late_dropout;
  }
  return j;
}

}  // namespace

nn::ArchitectureSpec RunConfig::build_architecture(const Shape& input_shape) const {
  nn::ArchitectureSpec spec;
  with_path("architecture", [&] {
    if (architecture.name == "resnet")
      spec = nn::build_resnet(architecture.blocks_per_group, architecture.width, input_shape);
    else if (architecture.name == "alexnet")
      spec = nn::build_alexnet(architecture.alexnet, input_shape);
    else
      spec = nn::build_named(architecture.name, input_shape);
    nn::infer_output_shape(spec);
  });
  return spec;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::config, std::string("malformed JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  c.name = root.string("name", c.name);
  parse_dataset(root.section("dataset"), c.dataset);

  {
    Section t = root.section("tasks");
    c.n_tasks = t.integer("count", c.n_tasks);
    if (t.has("classes_per_task")) c.classes_per_task = t.integer("classes_per_task", 0);
    require(c.n_tasks >= 1, ErrorKind::config, "tasks.count must be >= 1");
    require(!c.classes_per_task || *c.classes_per_task >= 1, ErrorKind::config, "tasks.classes_per_task must be >= 1");
    t.finish();
  }
  parse_architecture(root.section("architecture"), c.architecture);
  parse_strategy(root.section("strategy"), c.strategy);
  parse_augmentation(root.section("augmentation"), c.train.aug);
  {
    Section o = root.section("optimizer");
    c.train.optim.lr = o.number("lr", c.train.optim.lr);
    c.train.optim.momentum = o.number("momentum", c.train.optim.momentum);
    c.train.batch_size = o.integer("batch_size", c.train.batch_size);
    c.train.eval_batch_size = o.integer("eval_batch_size", c.train.eval_batch_size);
    o.finish();
  }
  {
    Section s = root.section("schedule");
    auto& sc = c.train.sched;
    sc.factor = s.number("factor", sc.factor);
    sc.patience = s.integer("patience", sc.patience);
    sc.min_lr = s.number("min_lr", sc.min_lr);
    sc.max_epochs = s.integer("max_epochs", sc.max_epochs);
    sc.tolerance = s.number("tolerance", sc.tolerance);
    s.finish();
  }
  with_path("optimizer", [&] { c.train.validate(); });
  c.seeds = root.integers("seeds", c.seeds);
  require(!c.seeds.empty(), ErrorKind::config, "seeds must not be empty");
  {
    std::set<std::uint64_t> uniq(c.seeds.begin(), c.seeds.end());
    require(uniq.size() == c.seeds.size(), ErrorKind::config, "seeds must be distinct");
  }
  c.output = root.string("output", c.output.string());
  const auto precision = root.string("precision", "f32");
  require(precision == "f32" || precision == "f64", ErrorKind::config,
          "precision must be f32 or f64, got '" + precision + "'");
  c.precision = precision == "f32" ? Precision::f32 : Precision::f64;
  c.threads = root.integer("threads", c.threads);
  require(c.threads >= 1, ErrorKind::config, "threads must be >= 1");
  root.finish();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorKind::config, "cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  RunConfig c = parse_config(ss.str());
  // Dataset paths are relative to the config file.
  const auto base = path.parent_path();
  for (auto* p : {&c.dataset.train_path, &c.dataset.test_path})
    if (!p->empty() && p->is_relative()) *p = (base / *p).lexically_normal();
  return c;
}

std::string dump_config(const RunConfig& c, bool include_seeds) {
  json d{{"source", to_string(c.dataset.source)}};
  if (c.dataset.source == DataSource::synthetic) {
    d["classes"] = c.dataset.synth.n_classes;
    d["train_per_class"] = c.dataset.synth.per_class;
    d["test_per_class"] = c.dataset.synth_test_per_class;
    d["image_size"] = c.dataset.synth.image_size;
    d["separation"] = c.dataset.synth.separation;
    d["seed"] = c.dataset.synth_seed ? json(*c.dataset.synth_seed) : json(nullptr);
  } else {
    d["train"] = c.dataset.train_path.string();
    d["test"] = c.dataset.test_path.string();
  }
  const auto& s = c.strategy;
  const auto& a = c.train.aug;
  const auto& sc = c.train.sched;
  json j{
      {"name", c.name},
      {"dataset", d},
      {"tasks", {{"count", c.n_tasks}, {"classes_per_task", c.classes_per_task ? json(*c.classes_per_task) : json(nullptr)}}},
      {"architecture", arch_json(c.architecture)},
      {"strategy",
       {{"name", strategies::to_string(s.kind)},
        {"theta", s.theta},
        {"distill_weight", s.distill_weight},
        {"lambda", s.ewc_lambda},
        {"gamma", s.ewc_gamma},
        {"fisher_samples", s.fisher_samples},
        {"imm_mode", strategies::to_string(s.imm_mode)},
        {"imm_l2", s.imm_l2}}},
      {"augmentation",
       {{"enabled", a.enabled},
        {"max_translate_px", a.max_translate_px},
        {"vertical_translate", a.vertical_translate},
        {"hflip_prob", a.hflip_prob},
        {"brightness", a.brightness},
        {"contrast", a.contrast},
        {"saturation", a.saturation},
        {"hue", a.hue}}},
      {"optimizer",
       {{"lr", c.train.optim.lr},
        {"momentum", c.train.optim.momentum},
        {"batch_size", c.train.batch_size},
        {"eval_batch_size", c.train.eval_batch_size}}},
      {"schedule",
       {{"factor", sc.factor},
        {"patience", sc.patience},
        {"min_lr", sc.min_lr},
        {"max_epochs", sc.max_epochs},
        {"tolerance", sc.tolerance}}},
      {"output", c.output.string()},
      {"precision", to_string(c.precision)},
      {"threads", c.threads},
  };
  if (include_seeds) j["seeds"] = c.seeds;
  return j.dump(2);
}

std::string config_digest(const RunConfig& config) {
  const std::string text = dump_config(config, false);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace lwf::runner
