// Copyright 2026 The tubeseq Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <map>
#include <sstream>

#include "tubeseq/error.hpp"
#include "tubeseq/train.hpp"

namespace tubeseq {

namespace {

constexpr std::string_view kMagic = "TSCK ";

void put_f64(std::vector<std::uint8_t>& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

double get_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (static_cast<std::uint32_t>(p[1]) << 8) | (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

struct Declared {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

std::string dims(std::size_t r, std::size_t c) { return "[" + std::to_string(r) + "x" + std::to_string(c) + "]"; }

class Manifest {
 public:
  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  template <typename T>
  void set(const std::string& key, T value) {
    std::ostringstream os;
    os << std::setprecision(17) << value;
    kv_[key] = os.str();
  }

  const std::string& get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw FormatError("missing-key", "checkpoint manifest lacks '" + key + "'");
    return it->second;
  }
  long long get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw FormatError("bad-value", "manifest key '" + key + "' is not an integer: '" + v + "'");
    }
  }
  double get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw FormatError("bad-value", "manifest key '" + key + "' is not a number: '" + v + "'");
    }
  }
  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true") return true;
    if (v == "0" || v == "false") return false;
    throw FormatError("bad-value", "manifest key '" + key + "' is not a boolean: '" + v + "'");
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

void write_config(Manifest& m, const ModelConfig& c, const TrainConfig& t) {
  m.set("model.resolution", c.resolution);
  m.set("model.embed_dim", c.embed_dim);
  m.set("model.hidden_dim", c.hidden_dim);
  m.set("model.share_mode", to_string(c.share_mode));
  m.set("model.axis", to_string(c.axis));
  m.set("model.use_attention", c.use_attention ? 1 : 0);
  m.set("model.bidirectional", c.bidirectional ? 1 : 0);
  m.set("model.cell", to_string(c.cell));
  m.set("model.max_dec_steps", c.max_dec_steps);
  m.set("model.max_enc_steps", c.max_enc_steps);
  m.set("train.learning_rate", t.learning_rate);
  m.set("train.adam_eps", t.adam_eps);
  m.set("train.adam_beta1", t.adam_beta1);
  m.set("train.adam_beta2", t.adam_beta2);
  m.set("train.batch_size", t.batch_size);
  m.set("train.max_steps", t.max_steps);
  m.set("train.seed", t.seed);
  m.set("train.empty_tube_keep_ratio", t.empty_tube_keep_ratio);
  m.set("train.eval_interval", t.eval_interval);
  m.set("train.target_iou", t.target_iou);
  m.set("train.train_latents", t.train_latents ? 1 : 0);
  m.set("train.fit_steps", t.fit_steps);
}

template <typename Fn>
auto as_format_error(Fn&& fn) {
  try {
    return fn();
  } catch (const InvalidArgument& e) {
    throw FormatError("bad-config", e.what());
  }
}

ModelConfig read_model_config(const Manifest& m) {
  return as_format_error([&] {
    ModelConfig c;
    c.resolution = static_cast<int>(m.get_int("model.resolution"));
    c.embed_dim = static_cast<int>(m.get_int("model.embed_dim"));
    c.hidden_dim = static_cast<int>(m.get_int("model.hidden_dim"));
    c.share_mode = parse_share_mode(m.get("model.share_mode"));
    c.axis = parse_axis(m.get("model.axis"));
    c.use_attention = m.get_bool("model.use_attention");
    c.bidirectional = m.get_bool("model.bidirectional");
    c.cell = parse_cell_type(m.get("model.cell"));
    c.max_dec_steps = static_cast<int>(m.get_int("model.max_dec_steps"));
    c.max_enc_steps = static_cast<int>(m.get_int("model.max_enc_steps"));
    c.validate();
    return c;
  });
}

TrainConfig read_train_config(const Manifest& m) {
  return as_format_error([&] {
    TrainConfig t;
    t.learning_rate = m.get_double("train.learning_rate");
    t.adam_eps = m.get_double("train.adam_eps");
    t.adam_beta1 = m.get_double("train.adam_beta1");
    t.adam_beta2 = m.get_double("train.adam_beta2");
    t.batch_size = static_cast<int>(m.get_int("train.batch_size"));
    t.max_steps = static_cast<int>(m.get_int("train.max_steps"));
    t.seed = std::stoull(m.get("train.seed"));
    t.empty_tube_keep_ratio = m.get_double("train.empty_tube_keep_ratio");
    t.eval_interval = static_cast<int>(m.get_int("train.eval_interval"));
    t.target_iou = m.get_double("train.target_iou");
    t.train_latents = m.get_bool("train.train_latents");
    t.fit_steps = static_cast<int>(m.get_int("train.fit_steps"));
    t.validate();
    return t;
  });
}

}  // namespace

std::vector<std::uint8_t> write_checkpoint(const TrainingState& state) {
  const ParamStore& params = state.model.params();
  Manifest m;
  write_config(m, state.model.config(), state.train_cfg);
  m.set("adam.model.step", state.model_opt.step);
  m.set("adam.latent.step", state.latent_opt.step);
  m.set("latent.count", state.latents.size());

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (std::size_t i = 0; i < params.slot_count(); ++i) {
    tensors.emplace_back("param." + params.slot_name(i), &params.slot_value(i));
  }
  for (std::size_t i = 0; i < params.slot_count(); ++i) {
    tensors.emplace_back("adam.model.m." + params.slot_name(i), &state.model_opt.m.at(i));
    tensors.emplace_back("adam.model.v." + params.slot_name(i), &state.model_opt.v.at(i));
  }
  tensors.emplace_back("latents", &state.latents.values());
  tensors.emplace_back("adam.latent.m", &state.latent_opt.m.at(0));
  tensors.emplace_back("adam.latent.v", &state.latent_opt.v.at(0));

  std::ostringstream os;
  os << kMagic << kCheckpointVersion << '\n';
  for (const auto& [k, v] : m.entries()) os << "set " << k << '=' << v << '\n';
  for (const auto& id : state.latents.ids()) {
    if (id.find('\n') != std::string::npos) throw InvalidArgument("latent id contains a newline");
    os << "latent " << id << '\n';
  }
  for (const auto& [name, t] : tensors) os << "tensor " << name << ' ' << t->rows() << ' ' << t->cols() << '\n';
  for (const auto& [name, slot] : params.names()) {
    if (params.slot_name(slot) != name) os << "alias " << name << ' ' << params.slot_name(slot) << '\n';
  }
  os << "end\n";

  const std::string header = os.str();
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (const auto& [name, t] : tensors) {
    for (double x : t->data()) put_f64(out, x);
  }
  return out;
}

TrainingState read_checkpoint(std::span<const std::uint8_t> bytes) {
  std::size_t pos = 0;
  auto next_line = [&](std::string& line) {
    line.clear();
    while (pos < bytes.size() && bytes[pos] != '\n') line.push_back(static_cast<char>(bytes[pos++]));
    if (pos >= bytes.size()) throw FormatError("truncated", "checkpoint manifest ends early");
    ++pos;
  };
  std::string line;
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw FormatError("bad-magic", "checkpoint must start with 'TSCK '");
  }
  next_line(line);
  if (line != std::string(kMagic) + std::to_string(kCheckpointVersion)) {
    throw FormatError("version-mismatch", "unsupported checkpoint header '" + line + "'");
  }

  Manifest m;
  std::vector<std::string> latent_ids;
  std::vector<Declared> declared;
  std::vector<std::pair<std::string, std::string>> aliases;
  for (;;) {
    next_line(line);
    if (line == "end") break;
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "set") {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw FormatError("bad-manifest", "malformed line '" + line + "'");
      m.set(line.substr(4, eq - 4), line.substr(eq + 1));
    } else if (kind == "latent") {
      latent_ids.push_back(line.substr(7));
    } else if (kind == "tensor") {
      Declared d;
      if (!(ls >> d.name >> d.rows >> d.cols)) throw FormatError("bad-manifest", "malformed line '" + line + "'");
      declared.push_back(d);
    } else if (kind == "alias") {
      std::string a, b;
      if (!(ls >> a >> b)) throw FormatError("bad-manifest", "malformed line '" + line + "'");
      aliases.emplace_back(a, b);
    } else {
      throw FormatError("bad-manifest", "unknown manifest line '" + line + "'");
    }
  }

  const ModelConfig mcfg = read_model_config(m);
  const TrainConfig tcfg = read_train_config(m);
  const ParamLayout layout = param_layout(mcfg);
  const auto latent_count = static_cast<std::size_t>(m.get_int("latent.count"));
  if (latent_ids.size() != latent_count) {
    throw FormatError("bad-manifest", "latent.count=" + std::to_string(latent_count) + " but " +
                                          std::to_string(latent_ids.size()) + " ids listed");
  }

  // Expected tensor list, in write order.
  std::vector<Declared> expected;
  for (const auto& [name, shape] : layout.slots) expected.push_back({"param." + name, shape.first, shape.second});
  for (const auto& [name, shape] : layout.slots) {
    expected.push_back({"adam.model.m." + name, shape.first, shape.second});
    expected.push_back({"adam.model.v." + name, shape.first, shape.second});
  }
  const auto d = static_cast<std::size_t>(mcfg.embed_dim);
  expected.push_back({"latents", latent_count, d});
  expected.push_back({"adam.latent.m", latent_count, d});
  expected.push_back({"adam.latent.v", latent_count, d});

  if (declared.size() != expected.size()) {
    throw FormatError("shape-mismatch", "checkpoint declares " + std::to_string(declared.size()) +
                                            " tensors, configuration needs " + std::to_string(expected.size()));
  }
  std::size_t payload = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const Declared& got = declared[i];
    const Declared& want = expected[i];
    if (got.name != want.name) {
      throw FormatError("shape-mismatch", "tensor #" + std::to_string(i) + " is '" + got.name + "', expected '" +
                                              want.name + "'");
    }
    if (got.rows != want.rows || got.cols != want.cols) {
      throw FormatError("shape-mismatch", "tensor '" + got.name + "' declared " + dims(got.rows, got.cols) +
                                              " but configuration expects " + dims(want.rows, want.cols));
    }
    payload += got.rows * got.cols * 8;
  }
  if (bytes.size() - pos != payload) {
    throw FormatError(bytes.size() - pos < payload ? "truncated" : "trailing-bytes",
                      "payload has " + std::to_string(bytes.size() - pos) + " bytes, manifest declares " +
                          std::to_string(payload));
  }

  std::vector<Tensor> values;
  for (const Declared& dcl : declared) {
    Tensor t(dcl.rows, dcl.cols);
    for (double& x : t.data()) {
      x = get_f64(bytes.data() + pos);
      pos += 8;
    }
    values.push_back(std::move(t));
  }

  ParamStore params;
  const std::size_t n = layout.slots.size();
  for (std::size_t i = 0; i < n; ++i) params.add(layout.slots[i].first, std::move(values[i]));
  for (const auto& [a, b] : aliases) {
    const bool listed = std::any_of(layout.aliases.begin(), layout.aliases.end(),
                                    [&](const auto& p) { return p.first == a && p.second == b; });
    if (!listed) throw FormatError("bad-alias", "alias '" + a + "' -> '" + b + "' does not match share_mode");
  }
  if (aliases.size() != layout.aliases.size()) {
    throw FormatError("bad-alias", "checkpoint lists " + std::to_string(aliases.size()) + " aliases, share_mode needs " +
                                       std::to_string(layout.aliases.size()));
  }

  Model model = as_format_error([&] { return Model(mcfg, std::move(params)); });
  LatentTable latents(latent_ids, std::move(values[3 * n]));
  TrainingState state(std::move(model), std::move(latents), tcfg);
  for (std::size_t i = 0; i < n; ++i) {
    state.model_opt.m[i] = std::move(values[n + 2 * i]);
    state.model_opt.v[i] = std::move(values[n + 2 * i + 1]);
  }
  state.latent_opt.m[0] = std::move(values[3 * n + 1]);
  state.latent_opt.v[0] = std::move(values[3 * n + 2]);
  state.model_opt.step = m.get_int("adam.model.step");
  state.latent_opt.step = m.get_int("adam.latent.step");
  return state;
}

TrainingState read_checkpoint(std::span<const std::uint8_t> bytes, const ModelConfig& expected) {
  TrainingState state = read_checkpoint(bytes);
  const ParamLayout want = param_layout(expected);
  const ParamStore& got = state.model.params();
  for (std::size_t i = 0; i < want.slots.size(); ++i) {
    const auto& [name, shape] = want.slots[i];
    if (!got.contains(name)) {
      throw FormatError("shape-mismatch", "checkpoint has no tensor '" + name + "' required by the configuration");
    }
    const Tensor& t = got.value(name);
    if (t.rows() != shape.first || t.cols() != shape.second) {
      throw FormatError("shape-mismatch", "tensor '" + name + "' is " + shape_string(t) +
                                              " in the checkpoint but the configuration expects " +
                                              dims(shape.first, shape.second));
    }
  }
  if (got.slot_count() != want.slots.size() || !(state.model.config() == expected)) {
    throw FormatError("config-mismatch", "checkpoint model configuration differs from the requested one");
  }
  return state;
}

void save_checkpoint(const TrainingState& state, const std::string& path) {
  write_file(path, write_checkpoint(state));
}

TrainingState load_checkpoint(const std::string& path) { return read_checkpoint(read_file(path)); }

// ---------------------------------------------------------------------------
// FEAT

std::vector<std::uint8_t> write_features(const Tensor& features) {
  std::vector<std::uint8_t> out = {'F', 'E', 'A', 'T'};
  put_u32(out, static_cast<std::uint32_t>(features.rows()));
  put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (double x : features.data()) put_f64(out, x);
  return out;
}

Tensor read_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "FEAT", 4) != 0) {
    throw FormatError("bad-magic", "feature file must start with 'FEAT' and a 12-byte header");
  }
  const std::size_t count = get_u32(bytes.data() + 4);
  const std::size_t dim = get_u32(bytes.data() + 8);
  if (dim == 0) throw FormatError("bad-header", "feature dimension is 0");
  if (bytes.size() - 12 != count * dim * 8) {
    throw FormatError(bytes.size() - 12 < count * dim * 8 ? "truncated" : "trailing-bytes",
                      "feature payload has " + std::to_string(bytes.size() - 12) + " bytes, header declares " +
                          std::to_string(count * dim * 8));
  }
  Tensor t(count, dim);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = get_f64(bytes.data() + 12 + 8 * i);
    if (!std::isfinite(t[i])) throw FormatError("bad-value", "non-finite feature value");
  }
  return t;
}

}  // namespace tubeseq
