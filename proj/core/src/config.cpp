#include "mccsod/config.hpp"

#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mccsod/errors.hpp"

namespace mccsod {

namespace {

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' expects a boolean, got '" + v + "'");
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto r = std::stoll(v, &pos);
    if (pos == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    auto r = std::stod(v, &pos);
    if (pos == v.size()) return r;
  } catch (const std::exception&) {
  }
  throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
}

template <std::size_t N, typename T, typename Parse>
std::array<T, N> parse_list(const std::string& key, const std::string& v, Parse parse) {
  std::array<T, N> out{};
  std::stringstream ss(v);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i == N) break;
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    out[i++] = static_cast<T>(parse(key, item));
  }
  if (i != N || std::getline(ss, item, ','))
    throw ConfigError("'" + key + "' expects " + std::to_string(N) + " comma-separated values");
  return out;
}

template <typename Container>
std::string join(const Container& c) {
  std::ostringstream os;
  os.precision(17);
  bool first = true;
  for (const auto& v : c) {
    os << (first ? "" : ", ") << v;
    first = false;
  }
  return os.str();
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* boolstr(bool b) { return b ? "true" : "false"; }

}  // namespace

PrepareOptions RunConfig::prepare_options() const {
  return {network.input_size, network.resolved_normalization(), edge_band};
}

void set_config_value(RunConfig& c, const std::string& section, const std::string& key, const std::string& v) {
  const auto full = section + "." + key;
  auto& n = c.network;
  auto& t = c.train;
  if (section == "network") {
    if (key == "input_size") n.input_size = parse_int(full, v);
    else if (key == "foreground") n.mccm.foreground = parse_bool(full, v);
    else if (key == "edge") n.mccm.edge = parse_bool(full, v);
    else if (key == "background") n.mccm.background = parse_bool(full, v);
    else if (key == "global") n.mccm.global = parse_bool(full, v);
    else if (key == "short_connection") n.mccm.short_connection = parse_bool(full, v);
    else if (key == "reduction") n.mccm_options.reduction = parse_int(full, v);
    else if (key == "spatial_kernel") n.mccm_options.spatial_kernel = parse_int(full, v);
    else if (key == "use_pretrained_encoder") n.use_pretrained_encoder = parse_bool(full, v);
    else if (key == "channels") n.channels = parse_list<kLevels, std::int64_t>(full, v, parse_int);
    else if (key == "norm_mean" || key == "norm_std") {
      auto norm = n.resolved_normalization();
      (key == "norm_mean" ? norm.mean : norm.stddev) = parse_list<3, double>(full, v, parse_double);
      n.normalization = norm;
    } else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "train") {
    if (key == "batch_size") t.batch_size = static_cast<int>(parse_int(full, v));
    else if (key == "initial_lr") t.initial_lr = parse_double(full, v);
    else if (key == "lr_decay_epoch") t.lr_decay_epoch = static_cast<int>(parse_int(full, v));
    else if (key == "lr_decay_factor") t.lr_decay_factor = parse_double(full, v);
    else if (key == "epochs") t.epochs = static_cast<int>(parse_int(full, v));
    else if (key == "seed") t.seed = static_cast<std::uint64_t>(parse_int(full, v));
    else if (key == "augment") t.augment = parse_bool(full, v);
    else if (key == "bce_reduction") {
      if (v == "mean") t.loss.bce_reduction = BceReduction::kMean;
      else if (v == "sum") t.loss.bce_reduction = BceReduction::kSum;
      else throw ConfigError("'" + full + "' expects mean or sum");
    } else if (key == "use_bce") t.loss.use_bce = parse_bool(full, v);
    else if (key == "use_iou") t.loss.use_iou = parse_bool(full, v);
    else if (key == "use_fmeasure") t.loss.use_fmeasure = parse_bool(full, v);
    else if (key == "use_edge") t.loss.use_edge = parse_bool(full, v);
    else if (key == "grad_clip") {
      const double g = parse_double(full, v);
      t.grad_clip = g > 0 ? std::optional<double>(g) : std::nullopt;
    } else if (key == "snapshot_every") t.snapshot_every = static_cast<int>(parse_int(full, v));
    else if (key == "max_iterations") t.max_iterations = parse_int(full, v);
    else if (key == "dtype") {
      if (v == "float32") t.dtype = torch::kFloat32;
      else if (v == "float64") t.dtype = torch::kFloat64;
      else throw ConfigError("'" + full + "' expects float32 or float64");
    } else if (key == "pretrained_archive") t.pretrained_archive = v;
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "data") {
    if (key == "edge_band") c.edge_band = static_cast<int>(parse_int(full, v));
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "eval") {
    if (key == "native_resolution") c.eval.native_resolution = parse_bool(full, v);
    else if (key == "eval_size") c.eval.eval_size = static_cast<int>(parse_int(full, v));
    else if (key == "skip_empty_gt") c.eval.skip_empty_gt = parse_bool(full, v);
    else throw ConfigError("unknown config key '" + full + "'");
  } else {
    throw ConfigError("unknown config section '" + section + "'");
  }
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.message());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError("config key '" + section + "' must live inside a [section]");
    for (const auto& [key, value] : body) set_config_value(config, section, key, value.get_value<std::string>());
  }
}

std::string to_config_text(const RunConfig& c) {
  const auto& n = c.network;
  const auto& t = c.train;
  const auto norm = n.resolved_normalization();
  std::ostringstream os;
  os << "[network]\n"
     << "input_size = " << n.input_size << "\n"
     << "foreground = " << boolstr(n.mccm.foreground) << "\n"
     << "edge = " << boolstr(n.mccm.edge) << "\n"
     << "background = " << boolstr(n.mccm.background) << "\n"
     << "global = " << boolstr(n.mccm.global) << "\n"
     << "short_connection = " << boolstr(n.mccm.short_connection) << "\n"
     << "reduction = " << n.mccm_options.reduction << "\n"
     << "spatial_kernel = " << n.mccm_options.spatial_kernel << "\n"
     << "use_pretrained_encoder = " << boolstr(n.use_pretrained_encoder) << "\n"
     << "channels = " << join(n.channels) << "\n"
     << "norm_mean = " << join(norm.mean) << "\n"
     << "norm_std = " << join(norm.stddev) << "\n"
     << "\n[train]\n"
     << "batch_size = " << t.batch_size << "\n"
     << "initial_lr = " << num(t.initial_lr) << "\n"
     << "lr_decay_epoch = " << t.lr_decay_epoch << "\n"
     << "lr_decay_factor = " << num(t.lr_decay_factor) << "\n"
     << "epochs = " << t.epochs << "\n"
     << "seed = " << t.seed << "\n"
     << "augment = " << boolstr(t.augment) << "\n"
     << "bce_reduction = " << (t.loss.bce_reduction == BceReduction::kSum ? "sum" : "mean") << "\n"
     << "use_bce = " << boolstr(t.loss.use_bce) << "\n"
     << "use_iou = " << boolstr(t.loss.use_iou) << "\n"
     << "use_fmeasure = " << boolstr(t.loss.use_fmeasure) << "\n"
     << "use_edge = " << boolstr(t.loss.use_edge) << "\n"
     << "grad_clip = " << (t.grad_clip ? num(*t.grad_clip) : "0") << "\n"
     << "snapshot_every = " << t.snapshot_every << "\n"
     << "max_iterations = " << t.max_iterations << "\n"
     << "dtype = " << (t.dtype == torch::kFloat64 ? "float64" : "float32") << "\n"
     << "pretrained_archive = " << t.pretrained_archive.string() << "\n"
     << "\n[data]\n"
     << "edge_band = " << c.edge_band << "\n"
     << "\n[eval]\n"
     << "native_resolution = " << boolstr(c.eval.native_resolution) << "\n"
     << "eval_size = " << c.eval.eval_size << "\n"
     << "skip_empty_gt = " << boolstr(c.eval.skip_empty_gt) << "\n";
  return os.str();
}

}  // namespace mccsod
