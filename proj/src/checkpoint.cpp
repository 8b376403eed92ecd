#include "pushgrasp/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

namespace pushgrasp {

namespace {

constexpr char kMagic[4] = {'P', 'G', 'C', 'K'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void put_floats(const float* data, std::size_t n) {
    put(static_cast<std::uint64_t>(n));
    const auto* p = reinterpret_cast<const char*>(data);
    buf_.insert(buf_.end(), p, p + n * sizeof(float));
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<float> get_floats() {
    const auto n = get<std::uint64_t>();
    if (n > size_) throw CheckpointError("checkpoint record size is corrupt");
    need(n * sizeof(float));
    std::vector<float> v(n);
    std::memcpy(v.data(), data_ + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    return v;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw CheckpointError("checkpoint file is truncated");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void add_net(Writer& w, const std::string& prefix, const QNet& net, int& count) {
  for (const auto& p : const_cast<QNet&>(net).state()) {
    w.put_string(prefix + p.name);
    w.put_floats(p.value, static_cast<std::size_t>(p.size));
    ++count;
  }
}

void add_optimizer(Writer& w, const std::string& prefix, const nn::Adam<float>& opt,
                   int& count) {
  auto moments = const_cast<nn::Adam<float>&>(opt).moments();
  for (std::size_t i = 0; i < moments.size(); ++i) {
    w.put_string(prefix + (i % 2 == 0 ? "m." : "v.") + std::to_string(i / 2));
    w.put_floats(moments[i]->data(), static_cast<std::size_t>(moments[i]->size()));
    ++count;
  }
}

using Records = std::map<std::string, std::vector<float>>;

// Copies records into a staged network, validating names and sizes.
void stage_net(const Records& records, const std::string& prefix, QNet& net) {
  for (auto& p : net.state()) {
    const auto it = records.find(prefix + p.name);
    if (it == records.end()) throw CheckpointError("checkpoint lacks tensor " + prefix + p.name);
    if (static_cast<Eigen::Index>(it->second.size()) != p.size) {
      throw CheckpointError("tensor " + prefix + p.name + " has " +
                            std::to_string(it->second.size()) + " values, network expects " +
                            std::to_string(p.size));
    }
    std::copy(it->second.begin(), it->second.end(), p.value);
  }
}

void stage_optimizer(const Records& records, const std::map<std::string, long long>& counters,
                     const std::string& prefix, QNet& net, nn::Adam<float>& opt) {
  const auto step = counters.find(prefix + "step");
  if (step == counters.end()) return;
  std::vector<nn::Vector<float>> m, v;
  const auto params = net.parameters();
  for (std::size_t i = 0;; ++i) {
    const auto mi = records.find(prefix + "m." + std::to_string(i));
    const auto vi = records.find(prefix + "v." + std::to_string(i));
    if (mi == records.end() || vi == records.end()) break;
    if (i >= params.size() ||
        static_cast<Eigen::Index>(mi->second.size()) != params[i].size ||
        mi->second.size() != vi->second.size()) {
      throw CheckpointError("optimizer state does not match the network");
    }
    m.push_back(Eigen::Map<const nn::Vector<float>>(mi->second.data(), params[i].size));
    v.push_back(Eigen::Map<const nn::Vector<float>>(vi->second.data(), params[i].size));
  }
  if (!m.empty() && m.size() != params.size()) {
    throw CheckpointError("optimizer state does not match the network");
  }
  opt.set_state(step->second, std::move(m), std::move(v));
}

}  // namespace

NetworkPair::NetworkPair(const NetworkConfig& cfg, const nn::AdamConfig& adam,
                         std::uint64_t seed)
    : grasp(cfg, seed * 2 + 1), push(cfg, seed * 2 + 2), grasp_opt(adam), push_opt(adam) {}

std::string meta_path(const std::string& checkpoint_path) { return checkpoint_path + ".meta"; }

void save_weights(const std::string& path, const NetworkPair& nets, const CheckpointMeta& meta) {
  Writer body;
  int count = 0;
  add_net(body, "grasp/", nets.grasp, count);
  add_net(body, "push/", nets.push, count);
  add_optimizer(body, "grasp.adam.", nets.grasp_opt, count);
  add_optimizer(body, "push.adam.", nets.push_opt, count);

  Writer w;
  for (char c : kMagic) w.put(c);
  w.put(kCheckpointVersion);
  w.put(static_cast<std::uint32_t>(count));
  w.put(static_cast<std::uint32_t>(2));  // counters
  w.put_string("grasp.adam.step");
  w.put(static_cast<std::int64_t>(nets.grasp_opt.steps()));
  w.put_string("push.adam.step");
  w.put(static_cast<std::int64_t>(nets.push_opt.steps()));
  auto& buf = w.buffer();
  buf.insert(buf.end(), body.buffer().begin(), body.buffer().end());
  const std::uint64_t checksum = fnv1a(buf.data(), buf.size());
  w.put(checksum);

  std::ostringstream side;
  side << "version=" << meta.version << "\n"
       << "stage=" << meta.stage << "\n"
       << "step=" << meta.step << "\n"
       << "episode=" << meta.episode << "\n"
       << "config_hash=" << meta.config_hash << "\n";
  for (const auto& [k, v] : meta.extra) side << k << "=" << v << "\n";

  write_atomic(path, std::string(w.buffer().begin(), w.buffer().end()));
  write_atomic(meta_path(path), side.str());
}

CheckpointMeta read_meta(const std::string& path) {
  CheckpointMeta meta;
  std::ifstream in(meta_path(path));
  if (!in) return meta;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "version") {
      meta.version = static_cast<std::uint32_t>(std::stoul(value));
    } else if (key == "stage") {
      meta.stage = value;
    } else if (key == "step") {
      meta.step = std::stoll(value);
    } else if (key == "episode") {
      meta.episode = std::stoll(value);
    } else if (key == "config_hash") {
      meta.config_hash = value;
    } else {
      meta.extra[key] = value;
    }
  }
  return meta;
}

CheckpointMeta load_weights(const std::string& path, NetworkPair& nets) {
  const std::string bytes = read_all(path);
  if (bytes.size() < sizeof(kMagic) + sizeof(std::uint32_t) ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path + " is not a checkpoint file");
  }
  Reader header(bytes.data() + sizeof(kMagic), bytes.size() - sizeof(kMagic));
  const auto version = header.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) +
                          ")");
  }
  if (bytes.size() < sizeof(std::uint64_t) + 12) throw CheckpointError("checkpoint file is truncated");
  const std::size_t payload = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + payload, sizeof(stored));
  if (fnv1a(bytes.data(), payload) != stored) {
    throw CheckpointError("checkpoint file is truncated or corrupt (checksum mismatch)");
  }

  Reader r(bytes.data() + sizeof(kMagic) + sizeof(std::uint32_t),
           payload - sizeof(kMagic) - sizeof(std::uint32_t));
  const auto count = r.get<std::uint32_t>();
  const auto n_counters = r.get<std::uint32_t>();
  std::map<std::string, long long> counters;
  for (std::uint32_t i = 0; i < n_counters; ++i) {
    const std::string name = r.get_string();
    counters[name] = r.get<std::int64_t>();
  }
  Records records;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    records[name] = r.get_floats();
  }
  if (!r.done()) throw CheckpointError("checkpoint has trailing data");

  NetworkPair staged = nets;
  stage_net(records, "grasp/", staged.grasp);
  stage_net(records, "push/", staged.push);
  stage_optimizer(records, counters, "grasp.adam.", staged.grasp, staged.grasp_opt);
  stage_optimizer(records, counters, "push.adam.", staged.push, staged.push_opt);
  nets = std::move(staged);
  return read_meta(path);
}

}  // namespace pushgrasp
