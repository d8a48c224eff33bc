#include "simvae/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "simvae/errors.hpp"
#include "simvae/io.hpp"

namespace simvae {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw std::invalid_argument("'" + text + "' is not a valid number");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw std::invalid_argument("expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(trim(item)));
  return out;
}

std::string format_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string group_name(sim::PermutationGroup g) {
  return g == sim::PermutationGroup::Dihedral ? "dihedral" : "symmetric";
}

sim::PermutationGroup parse_group(const std::string& s) {
  if (s == "dihedral") return sim::PermutationGroup::Dihedral;
  if (s == "symmetric") return sim::PermutationGroup::Symmetric;
  throw std::invalid_argument("permutation_group must be dihedral or symmetric, got '" + s + "'");
}

struct Field {
  std::string section;
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
Field size_field(std::string section, std::string key, T RunConfig::*member, std::size_t T::*field) {
  return {std::move(section), std::move(key), [=](const RunConfig& c) { return std::to_string(c.*member.*field); },
          [=](RunConfig& c, const std::string& v) { c.*member.*field = parse_number<std::size_t>(v); }};
}

template <class T>
Field double_field(std::string section, std::string key, T RunConfig::*member, double T::*field) {
  return {std::move(section), std::move(key), [=](const RunConfig& c) { return format_double(c.*member.*field); },
          [=](RunConfig& c, const std::string& v) { c.*member.*field = parse_number<double>(v); }};
}

void add_stage_fields(std::vector<Field>& f, const std::string& s, StageConfig RunConfig::*m) {
  f.push_back(size_field(s, "steps", m, &StageConfig::steps));
  f.push_back(size_field(s, "batch_size", m, &StageConfig::batch_size));
  f.push_back(double_field(s, "lr", m, &StageConfig::lr));
  f.push_back(size_field(s, "eval_every", m, &StageConfig::eval_every));
  f.push_back(size_field(s, "eval_count", m, &StageConfig::eval_count));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    using SO = sim::SimulatorOptions;
    f.push_back({"run", "seed", [](const RunConfig& c) { return std::to_string(c.seed); },
                 [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>(v); }});
    f.push_back({"run", "output_dir", [](const RunConfig& c) { return c.output_dir; },
                 [](RunConfig& c, const std::string& v) { c.output_dir = v; }});
    f.push_back({"run", "record_time", [](const RunConfig& c) { return c.record_time ? "true" : "false"; },
                 [](RunConfig& c, const std::string& v) { c.record_time = parse_bool(v); }});

    f.push_back({"simulator", "name", [](const RunConfig& c) { return c.simulator.name; },
                 [](RunConfig& c, const std::string& v) { c.simulator.name = v; }});
    f.push_back(size_field("simulator", "height", &RunConfig::simulator, &SO::height));
    f.push_back(size_field("simulator", "width", &RunConfig::simulator, &SO::width));
    f.push_back({"simulator", "fourier_mode", [](const RunConfig& c) { return c.simulator.fourier_mode; },
                 [](RunConfig& c, const std::string& v) { c.simulator.fourier_mode = v; }});
    f.push_back(size_field("simulator", "fourier_samples", &RunConfig::simulator, &SO::fourier_samples));
    f.push_back({"simulator", "permutation_group",
                 [](const RunConfig& c) { return group_name(c.simulator.permutation_group); },
                 [](RunConfig& c, const std::string& v) { c.simulator.permutation_group = parse_group(v); }});
    f.push_back(size_field("simulator", "identity_dim", &RunConfig::simulator, &SO::identity_dim));

    f.push_back({"model", "generator_hidden", [](const RunConfig& c) { return format_sizes(c.model.generator_hidden); },
                 [](RunConfig& c, const std::string& v) { c.model.generator_hidden = parse_sizes(v); }});
    f.push_back({"model", "encoder_hidden", [](const RunConfig& c) { return format_sizes(c.model.encoder_hidden); },
                 [](RunConfig& c, const std::string& v) { c.model.encoder_hidden = parse_sizes(v); }});

    add_stage_fields(f, "decoder", &RunConfig::decoder);
    add_stage_fields(f, "encoder", &RunConfig::encoder);
    f.push_back(double_field("encoder", "kl_weight", &RunConfig::encoder, &StageConfig::kl_weight));
    f.push_back({"encoder", "sampled_z", [](const RunConfig& c) { return c.encoder.sampled_z ? "true" : "false"; },
                 [](RunConfig& c, const std::string& v) { c.encoder.sampled_z = parse_bool(v); }});
    add_stage_fields(f, "baseline", &RunConfig::baseline);

    using BC = metrics::BinningConfig;
    f.push_back(size_field("metrics", "bins", &RunConfig::metrics, &BC::bins));
    f.push_back({"metrics", "strategy",
                 [](const RunConfig& c) { return std::string(metrics::strategy_name(c.metrics.strategy)); },
                 [](RunConfig& c, const std::string& v) { c.metrics.strategy = metrics::parse_strategy(v); }});
    f.push_back(size_field("metrics", "samples", &RunConfig::metrics, &BC::samples));
    f.push_back(double_field("metrics", "rlc_max_f0", &RunConfig::rlc_filter, &metrics::RlcFilter::max_f0));
    f.push_back(double_field("metrics", "rlc_max_q", &RunConfig::rlc_filter, &metrics::RlcFilter::max_q));
    return f;
  }();
  return table;
}

}  // namespace

StageConfig RunConfig::default_stage(Stage s) {
  StageConfig c;
  c.stage = s;
  return c;
}

StageConfig RunConfig::stage(Stage s) const {
  StageConfig c = s == Stage::Decoder ? decoder : s == Stage::Encoder ? encoder : baseline;
  c.stage = s;
  c.seed = stream_seed(seed, "stage." + std::string(stage_name(s)));
  return c;
}

void RunConfig::validate() const {
  (void)sim::make_simulator(simulator);
  for (Stage s : {Stage::Decoder, Stage::Encoder, Stage::Baseline}) {
    try {
      stage(s).validate();
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("[" + std::string(stage_name(s)) + "] " + e.what());
    }
  }
  if (model.encoder_hidden.empty()) throw std::invalid_argument("[model] encoder_hidden needs at least one layer");
  for (auto h : model.generator_hidden)
    if (h == 0) throw std::invalid_argument("[model] hidden widths must be positive");
  for (auto h : model.encoder_hidden)
    if (h == 0) throw std::invalid_argument("[model] hidden widths must be positive");
  metrics.validate();
  if (output_dir.empty()) throw std::invalid_argument("[run] output_dir is empty");
}

bool operator==(const RunConfig& a, const RunConfig& b) { return serialize_config(a) == serialize_config(b); }

RunConfig parse_config(std::string_view text) {
  RunConfig cfg;
  std::string section;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto where = [&] { return "config line " + std::to_string(line_no) + ": "; };
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError(where() + "unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : fields()) known = known || f.section == section;
      if (!known) throw FormatError(where() + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError(where() + "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const Field* field = nullptr;
    for (const auto& f : fields())
      if (f.section == section && f.key == key) field = &f;
    if (!field) throw FormatError(where() + "unknown key '" + key + "' in [" + section + "]");
    try {
      field->set(cfg, value);
    } catch (const std::invalid_argument& e) {
      throw FormatError(where() + key + ": " + e.what());
    } catch (const std::out_of_range&) {
      throw FormatError(where() + key + ": value out of range");
    }
  }
  return cfg;
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out, section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      out += (section.empty() ? "[" : "\n[") + f.section + "]\n";
      section = f.section;
    }
    out += f.key + " = " + f.get(cfg) + "\n";
  }
  return out;
}

RunConfig load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path)); }

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(serialize_config(cfg)); }

}  // namespace simvae
