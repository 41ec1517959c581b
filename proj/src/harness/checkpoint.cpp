#include "harness/checkpoint.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace m2i2::harness {

namespace {

constexpr char kMagic[8] = {'M', '2', 'I', '2', 'C', 'K', 'P', 'T'};

struct Writer {
  std::ofstream& out;
  template <class T>
  void pod(const T& x) {
    out.write(reinterpret_cast<const char*>(&x), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void params(const ParamSet& p) {
    pod<std::uint64_t>(p.size());
    for (const auto& [k, m] : p) {
      str(k);
      pod<std::int64_t>(m.rows());
      pod<std::int64_t>(m.cols());
      out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
  }
};

struct Reader {
  std::ifstream& in;
  const std::string& path;
  template <class T>
  T pod() {
    T x{};
    in.read(reinterpret_cast<char*>(&x), sizeof(T));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    return x;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 30)) throw std::runtime_error("corrupt checkpoint " + path);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error("truncated checkpoint " + path);
    return s;
  }
  ParamSet params() {
    ParamSet p;
    const auto n = pod<std::uint64_t>();
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string k = str();
      const auto r = pod<std::int64_t>();
      const auto c = pod<std::int64_t>();
      if (r < 0 || c < 0 || r * c > (1 << 26)) throw std::runtime_error("corrupt checkpoint tensor " + k);
      Matrix m(r, c);
      in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
      if (!in) throw std::runtime_error("truncated checkpoint " + path);
      p.emplace(std::move(k), std::move(m));
    }
    return p;
  }
};

}  // namespace

std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

void restore_rng(Rng& rng, const std::string& state) {
  std::istringstream is(state);
  is >> rng;
  if (!is) throw std::runtime_error("invalid rng state");
}

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp);
    Writer w{out};
    out.write(kMagic, sizeof(kMagic));
    w.pod(kCheckpointVersion);
    w.str(format_key_values(c.config));
    for (Index d : {c.dims.n_agents, c.dims.obs_dim, c.dims.state_dim, c.dims.n_actions}) w.pod<std::int64_t>(d);
    for (long x : {c.counters.env_steps, c.counters.episodes, c.counters.next_eval, c.updates}) w.pod<std::int64_t>(x);
    w.params(c.online);
    w.params(c.target);
    w.pod<std::int64_t>(c.theta_steps);
    w.params(c.theta_m);
    w.params(c.theta_v);
    w.pod<std::int64_t>(c.drn_steps);
    w.params(c.drn_m);
    w.params(c.drn_v);
    w.str(c.learner_rng);
    w.str(c.run_rng);
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp);
  }
  std::rename(tmp.c_str(), path.c_str());

  nlohmann::json m;
  m["format"] = "m2i2-checkpoint";
  m["version"] = kCheckpointVersion;
  m["config"] = c.config;
  m["dims"] = {{"n_agents", c.dims.n_agents},
               {"obs_dim", c.dims.obs_dim},
               {"state_dim", c.dims.state_dim},
               {"n_actions", c.dims.n_actions}};
  m["env_steps"] = c.counters.env_steps;
  m["episodes"] = c.counters.episodes;
  m["updates"] = c.updates;
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [k, v] : c.online) tensors[k] = {v.rows(), v.cols()};
  m["tensors"] = tensors;
  m["parameter_count"] = parameter_count(c.online);
  std::ofstream js(path + ".json", std::ios::trunc);
  js << m.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw std::runtime_error("not a checkpoint: " + path);
  Reader r{in, path};
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint c;
  c.config = parse_key_values(r.str());
  c.dims.n_agents = r.pod<std::int64_t>();
  c.dims.obs_dim = r.pod<std::int64_t>();
  c.dims.state_dim = r.pod<std::int64_t>();
  c.dims.n_actions = r.pod<std::int64_t>();
  c.counters.env_steps = r.pod<std::int64_t>();
  c.counters.episodes = r.pod<std::int64_t>();
  c.counters.next_eval = r.pod<std::int64_t>();
  c.updates = r.pod<std::int64_t>();
  c.online = r.params();
  c.target = r.params();
  c.theta_steps = r.pod<std::int64_t>();
  c.theta_m = r.params();
  c.theta_v = r.params();
  c.drn_steps = r.pod<std::int64_t>();
  c.drn_m = r.params();
  c.drn_v = r.params();
  c.learner_rng = r.str();
  c.run_rng = r.str();
  return c;
}

}  // namespace m2i2::harness
