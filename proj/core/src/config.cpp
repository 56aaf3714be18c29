#include "brp/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "brp/io.hpp"
#include "brp/schedule.hpp"

namespace brp {

const char* to_string(Stage2Loss l) { return l == Stage2Loss::kFocal ? "focal" : "cross-entropy"; }

Stage2Loss parse_stage2_loss(const std::string& s) {
  if (s == "focal") return Stage2Loss::kFocal;
  if (s == "cross-entropy" || s == "ce") return Stage2Loss::kCrossEntropy;
  throw std::invalid_argument("unknown stage-2 loss '" + s + "' (expected focal or cross-entropy)");
}

TrainConfig TrainConfig::full_scale() {
  TrainConfig c;
  c.stage1.tafe = TafeConfig::full_scale();
  return c;
}

TrainConfig TrainConfig::desk_scale() {
  TrainConfig c;
  c.stage1.epochs = 20;
  c.stage1.first_period = 20;
  c.stage1.batch_size = 2;
  c.stage1.boundary_width = 1;
  c.stage1.tafe = TafeConfig::desk_scale();
  c.stage1.augment.crop_size = 128;
  c.stage1.postproc.min_area = 5;
  c.stage1.postproc.dilation_radius = 1;
  c.stage2.epochs = 5;
  c.stage2.refine = RefineNetConfig::desk_scale();
  return c;
}

void TrainConfig::validate() const {
  stage1.tafe.validate();
  stage1.loss.validate();
  stage1.postproc.validate();
  stage1.augment.validate();
  stage2.refine.validate();
  stage2.patch.validate();
  make_restart_schedule(stage1.lr0, stage1.first_period, stage1.epochs);
  if (stage2.epochs < 1 || !(stage2.lr0 > 0.0)) {
    throw std::invalid_argument("stage2: epochs and lr0 must be positive");
  }
  if (stage1.batch_size < 1 || stage2.batch_size < 1) {
    throw std::invalid_argument("batch sizes must be positive");
  }
  if (!(stage1.val_fraction >= 0.0 && stage1.val_fraction < 1.0)) {
    throw std::invalid_argument("stage1.val_fraction must be in [0, 1)");
  }
  if (stage1.boundary_width < 1) throw std::invalid_argument("stage1.boundary_width must be >= 1");
  if (!(stage2.tau >= 0.0 && stage2.tau <= 1.0)) throw std::invalid_argument("stage2.tau must be in [0, 1]");
}

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("bad value for " + key + ": '" + s + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("bad boolean for " + key + ": '" + s + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <std::size_t N>
std::string join(const std::array<int, N>& a) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + std::to_string(a[i]);
  return s;
}

template <std::size_t N>
std::array<int, N> split_ints(const std::string& key, const std::string& s) {
  std::array<int, N> out{};
  std::stringstream ss(s);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) break;
    out[i++] = parse_number<int>(key, item);
  }
  if (i != N || ss.rdbuf()->in_avail() > 0) {
    throw std::invalid_argument(key + " needs " + std::to_string(N) + " comma-separated integers");
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const TrainConfig&)> get;
  std::function<void(TrainConfig&, const std::string&)> set;
};

std::vector<Field> fields() {
  std::vector<Field> f;
  auto add_int = [&f](std::string key, auto ref) {
    f.push_back({key, [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); },
                 [ref, key](TrainConfig& c, const std::string& v) { ref(c) = parse_number<int>(key, v); }});
  };
  auto add_u64 = [&f](std::string key, auto ref) {
    f.push_back({key, [ref](const TrainConfig& c) { return std::to_string(ref(const_cast<TrainConfig&>(c))); },
                 [ref, key](TrainConfig& c, const std::string& v) { ref(c) = parse_number<std::uint64_t>(key, v); }});
  };
  auto add_real = [&f](std::string key, auto ref) {
    f.push_back({key, [ref](const TrainConfig& c) { return fmt(ref(const_cast<TrainConfig&>(c))); },
                 [ref, key](TrainConfig& c, const std::string& v) { ref(c) = parse_number<double>(key, v); }});
  };
  auto add_bool = [&f](std::string key, auto ref) {
    f.push_back({key, [ref](const TrainConfig& c) { return std::string(ref(const_cast<TrainConfig&>(c)) ? "true" : "false"); },
                 [ref, key](TrainConfig& c, const std::string& v) { ref(c) = parse_bool(key, v); }});
  };
  auto add_ints4 = [&f](std::string key, auto ref) {
    f.push_back({key, [ref](const TrainConfig& c) { return join(ref(const_cast<TrainConfig&>(c))); },
                 [ref, key](TrainConfig& c, const std::string& v) { ref(c) = split_ints<4>(key, v); }});
  };
#define BRP_REF(expr) [](TrainConfig & c) -> auto& { return c.expr; }
  add_u64("seed", BRP_REF(seed));

  add_int("stage1.epochs", BRP_REF(stage1.epochs));
  add_real("stage1.lr0", BRP_REF(stage1.lr0));
  add_int("stage1.first_period", BRP_REF(stage1.first_period));
  add_real("stage1.weight_decay", BRP_REF(stage1.weight_decay));
  add_real("stage1.beta1", BRP_REF(stage1.beta1));
  add_real("stage1.beta2", BRP_REF(stage1.beta2));
  add_int("stage1.batch_size", BRP_REF(stage1.batch_size));
  add_real("stage1.val_fraction", BRP_REF(stage1.val_fraction));
  add_int("stage1.boundary_width", BRP_REF(stage1.boundary_width));
  add_bool("stage1.stain_normalize", BRP_REF(stage1.stain_normalize));

  add_ints4("stage1.tafe.block_depths", BRP_REF(stage1.tafe.block_depths));
  add_int("stage1.tafe.growth_rate", BRP_REF(stage1.tafe.growth_rate));
  add_int("stage1.tafe.proj_channels", BRP_REF(stage1.tafe.proj_channels));
  add_int("stage1.tafe.stem_channels", BRP_REF(stage1.tafe.stem_channels));
  add_int("stage1.tafe.bn_size", BRP_REF(stage1.tafe.bn_size));
  add_bool("stage1.tafe.use_ffm", BRP_REF(stage1.tafe.use_ffm));

  add_real("stage1.loss.st_gamma", BRP_REF(stage1.loss.st_gamma));
  add_real("stage1.loss.dice_weight", BRP_REF(stage1.loss.dice_weight));
  add_real("stage1.loss.dice_eps", BRP_REF(stage1.loss.dice_eps));
  add_real("stage1.loss.focal_gamma", BRP_REF(stage1.loss.focal_gamma));
  add_real("stage1.loss.focal_alpha", BRP_REF(stage1.loss.focal_alpha));
  add_real("stage1.loss.aux_weight", BRP_REF(stage1.loss.aux_weight));

  add_real("stage1.postproc.seg_thresh", BRP_REF(stage1.postproc.seg_thresh));
  add_real("stage1.postproc.bnd_thresh", BRP_REF(stage1.postproc.bnd_thresh));
  add_int("stage1.postproc.min_area", BRP_REF(stage1.postproc.min_area));
  add_int("stage1.postproc.dilation_radius", BRP_REF(stage1.postproc.dilation_radius));
  add_int("stage1.postproc.connectivity", BRP_REF(stage1.postproc.connectivity));

  add_int("stage1.augment.crop_size", BRP_REF(stage1.augment.crop_size));
  add_real("stage1.augment.hflip_prob", BRP_REF(stage1.augment.hflip_prob));
  add_real("stage1.augment.vflip_prob", BRP_REF(stage1.augment.vflip_prob));
  add_real("stage1.augment.color_jitter", BRP_REF(stage1.augment.color_jitter));
  add_real("stage1.augment.brightness_jitter", BRP_REF(stage1.augment.brightness_jitter));
  add_real("stage1.augment.jitter_prob", BRP_REF(stage1.augment.jitter_prob));
  add_real("stage1.augment.blur_prob", BRP_REF(stage1.augment.blur_prob));
  add_real("stage1.augment.blur_sigma_min", BRP_REF(stage1.augment.blur_sigma_min));
  add_real("stage1.augment.blur_sigma_max", BRP_REF(stage1.augment.blur_sigma_max));
  add_real("stage1.augment.elastic_prob", BRP_REF(stage1.augment.elastic_prob));
  add_real("stage1.augment.elastic_alpha", BRP_REF(stage1.augment.elastic_alpha));
  add_real("stage1.augment.elastic_sigma", BRP_REF(stage1.augment.elastic_sigma));

  add_int("stage2.epochs", BRP_REF(stage2.epochs));
  add_real("stage2.lr0", BRP_REF(stage2.lr0));
  add_real("stage2.weight_decay", BRP_REF(stage2.weight_decay));
  add_int("stage2.batch_size", BRP_REF(stage2.batch_size));
  add_real("stage2.tau", BRP_REF(stage2.tau));
  f.push_back({"stage2.loss", [](const TrainConfig& c) { return std::string(to_string(c.stage2.loss)); },
               [](TrainConfig& c, const std::string& v) { c.stage2.loss = parse_stage2_loss(v); }});

  add_ints4("stage2.refine.growth_rates", BRP_REF(stage2.refine.growth_rates));
  add_int("stage2.refine.layers_per_block", BRP_REF(stage2.refine.layers_per_block));
  add_int("stage2.refine.stem_channels", BRP_REF(stage2.refine.stem_channels));

  add_int("stage2.patch.margin", BRP_REF(stage2.patch.margin));
  add_int("stage2.patch.s_small", BRP_REF(stage2.patch.s_small));
  add_int("stage2.patch.s_large", BRP_REF(stage2.patch.s_large));
  add_int("stage2.patch.mask_dilation", BRP_REF(stage2.patch.mask_dilation));
  add_bool("stage2.patch.shift_into_image", BRP_REF(stage2.patch.shift_into_image));
#undef BRP_REF
  return f;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues to_key_values(const TrainConfig& cfg) {
  KeyValues kv;
  for (const auto& f : fields()) kv[f.key] = f.get(cfg);
  return kv;
}

void apply_key_values(TrainConfig& cfg, const KeyValues& kv) {
  const auto table = fields();
  for (const auto& [key, value] : kv) {
    if (key == "preset") continue;
    bool found = false;
    for (const auto& f : table) {
      if (f.key == key) {
        f.set(cfg, value);
        found = true;
        break;
      }
    }
    if (!found) throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

KeyValues parse_key_value_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const auto kv = parse_key_value_text(ss.str());
  TrainConfig cfg = TrainConfig::desk_scale();
  if (auto it = kv.find("preset"); it != kv.end()) {
    if (it->second == "full") cfg = TrainConfig::full_scale();
    else if (it->second != "desk") throw std::invalid_argument("unknown preset '" + it->second + "'");
  }
  apply_key_values(cfg, kv);
  cfg.validate();
  return cfg;
}

void save_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path.string());
  out << format_key_values(to_key_values(cfg));
}

}  // namespace brp
