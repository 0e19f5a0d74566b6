// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include "tubeseq/config.hpp"

#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "tubeseq/error.hpp"

namespace tubeseq {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("config key '" + key + "' expects an integer, got '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  if (!v.empty() && v[0] != '-') {
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(v, &used);
      if (used == v.size()) return x;
    } catch (const std::exception&) {
    }
  }
  throw InvalidArgument("config key '" + key + "' expects a non-negative integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("config key '" + key + "' expects a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("config key '" + key + "' expects true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"resolution", [](RunConfig& c, auto& k, auto& v) { c.model.resolution = static_cast<int>(to_int(k, v)); }},
      {"axis", [](RunConfig& c, auto&, auto& v) { c.model.axis = parse_axis(v); }},
      {"embed_dim", [](RunConfig& c, auto& k, auto& v) { c.model.embed_dim = static_cast<int>(to_int(k, v)); }},
      {"hidden_dim", [](RunConfig& c, auto& k, auto& v) { c.model.hidden_dim = static_cast<int>(to_int(k, v)); }},
      {"share_mode", [](RunConfig& c, auto&, auto& v) { c.model.share_mode = parse_share_mode(v); }},
      {"use_attention", [](RunConfig& c, auto& k, auto& v) { c.model.use_attention = to_bool(k, v); }},
      {"bidirectional", [](RunConfig& c, auto& k, auto& v) { c.model.bidirectional = to_bool(k, v); }},
      {"cell", [](RunConfig& c, auto&, auto& v) { c.model.cell = parse_cell_type(v); }},
      {"max_dec_steps",
       [](RunConfig& c, auto& k, auto& v) { c.model.max_dec_steps = static_cast<int>(to_int(k, v)); }},
      {"max_enc_steps",
       [](RunConfig& c, auto& k, auto& v) { c.model.max_enc_steps = static_cast<int>(to_int(k, v)); }},
      {"learning_rate", [](RunConfig& c, auto& k, auto& v) { c.train.learning_rate = to_double(k, v); }},
      {"adam_eps", [](RunConfig& c, auto& k, auto& v) { c.train.adam_eps = to_double(k, v); }},
      {"adam_beta1", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta1 = to_double(k, v); }},
      {"adam_beta2", [](RunConfig& c, auto& k, auto& v) { c.train.adam_beta2 = to_double(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = static_cast<int>(to_int(k, v)); }},
      {"max_steps", [](RunConfig& c, auto& k, auto& v) { c.train.max_steps = static_cast<int>(to_int(k, v)); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = to_u64(k, v); }},
      {"empty_tube_keep_ratio",
       [](RunConfig& c, auto& k, auto& v) { c.train.empty_tube_keep_ratio = to_double(k, v); }},
      {"eval_interval",
       [](RunConfig& c, auto& k, auto& v) { c.train.eval_interval = static_cast<int>(to_int(k, v)); }},
      {"target_iou", [](RunConfig& c, auto& k, auto& v) { c.train.target_iou = to_double(k, v); }},
      {"train_latents", [](RunConfig& c, auto& k, auto& v) { c.train.train_latents = to_bool(k, v); }},
      {"fit_steps", [](RunConfig& c, auto& k, auto& v) { c.train.fit_steps = static_cast<int>(to_int(k, v)); }},
      {"data", [](RunConfig& c, auto&, auto& v) { c.data_dir = v; }},
      {"out", [](RunConfig& c, auto&, auto& v) { c.out_path = v; }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw InvalidArgument("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    it->second(cfg, key, value);
  }
  cfg.model.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  const auto bytes = read_file(path);
  return parse_run_config(std::string(bytes.begin(), bytes.end()));
}

std::string format_run_config(const RunConfig& c) {
  std::ostringstream os;
  os << std::setprecision(17) << std::boolalpha;
  os << "resolution = " << c.model.resolution << '\n'
     << "axis = " << to_string(c.model.axis) << '\n'
     << "embed_dim = " << c.model.embed_dim << '\n'
     << "hidden_dim = " << c.model.hidden_dim << '\n'
     << "share_mode = " << to_string(c.model.share_mode) << '\n'
     << "use_attention = " << c.model.use_attention << '\n'
     << "bidirectional = " << c.model.bidirectional << '\n'
     << "cell = " << to_string(c.model.cell) << '\n'
     << "max_dec_steps = " << c.model.max_dec_steps << '\n'
     << "max_enc_steps = " << c.model.max_enc_steps << '\n'
     << "learning_rate = " << c.train.learning_rate << '\n'
     << "adam_eps = " << c.train.adam_eps << '\n'
     << "adam_beta1 = " << c.train.adam_beta1 << '\n'
     << "adam_beta2 = " << c.train.adam_beta2 << '\n'
     << "batch_size = " << c.train.batch_size << '\n'
     << "max_steps = " << c.train.max_steps << '\n'
     << "seed = " << c.train.seed << '\n'
     << "empty_tube_keep_ratio = " << c.train.empty_tube_keep_ratio << '\n'
     << "eval_interval = " << c.train.eval_interval << '\n'
     << "target_iou = " << c.train.target_iou << '\n'
     << "train_latents = " << c.train.train_latents << '\n'
     << "fit_steps = " << c.train.fit_steps << '\n';
  if (!c.data_dir.empty()) os << "data = " << c.data_dir << '\n';
  if (!c.out_path.empty()) os << "out = " << c.out_path << '\n';
  return os.str();
}

}  // namespace tubeseq
