#include "pushgrasp/run_store.hpp"

#include <signal.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pushgrasp/checkpoint.hpp"

namespace pushgrasp {

namespace {

bool process_alive(long pid) {
  if (pid <= 0) return false;
  return ::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM;
}

bool try_create_lock(const fs::path& path) {
  std::FILE* f = std::fopen(path.c_str(), "wx");
  if (f == nullptr) return false;
  std::fprintf(f, "%ld\n", static_cast<long>(::getpid()));
  std::fclose(f);
  return true;
}

// Parses "<stage>_ep<N>.ckpt".
std::optional<int> checkpoint_episode(const fs::path& p, Stage stage) {
  const std::string prefix = std::string(to_string(stage)) + "_ep";
  const std::string name = p.filename().string();
  if (name.rfind(prefix, 0) != 0 || p.extension() != ".ckpt") return std::nullopt;
  const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 5);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    return std::nullopt;
  }
  return std::stoi(digits);
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("io", "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError("io", "cannot write " + tmp.string());
    out << text;
    if (!out) throw CliError("io", "failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

RunLock::RunLock(const fs::path& dir) : path_(dir / "lock") {
  if (try_create_lock(path_)) return;
  long owner = 0;
  {
    std::ifstream in(path_);
    in >> owner;
  }
  if (process_alive(owner) && owner != static_cast<long>(::getpid())) {
    throw CliError("locked", "run directory " + dir.string() + " is in use by process " +
                                 std::to_string(owner));
  }
  fs::remove(path_);
  if (!try_create_lock(path_)) {
    throw CliError("locked", "could not take the lock on " + dir.string());
  }
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

JsonlWriter::JsonlWriter(const fs::path& path) {
  file_ = std::fopen(path.c_str(), "ab");
  if (file_ == nullptr) throw CliError("io", "cannot open log " + path.string());
  std::error_code ec;
  size_ = fs::file_size(path, ec);
  if (ec) size_ = 0;
}

JsonlWriter::~JsonlWriter() {
  if (file_ != nullptr) std::fclose(file_);
}

void JsonlWriter::write(const nlohmann::json& record) {
  const std::string line = record.dump() + "\n";
  if (std::fwrite(line.data(), 1, line.size(), file_) != line.size() || std::fflush(file_) != 0) {
    throw CliError("io", "failed appending to log");
  }
  size_ += line.size();
}

std::vector<nlohmann::json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CliError("io", "cannot read " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw CliError("parse", path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

void truncate_file(const fs::path& path, std::uintmax_t size) {
  if (!fs::exists(path)) return;
  if (fs::file_size(path) > size) fs::resize_file(path, size);
}

RunDirectory RunDirectory::open(const fs::path& root, const RunConfig& config) {
  RunDirectory dir;
  dir.root_ = root;
  dir.config_ = config;
  const fs::path snapshot = root / "config.txt";
  if (fs::exists(snapshot)) {
    const RunConfig stored = RunConfig::parse(read_text(snapshot));
    if (stored.hash() != config.hash()) {
      std::string keys;
      for (const auto& k : stored.diff(config)) {
        keys += "\n  " + k + ": run has " + stored.get(k) + ", requested " + config.get(k);
      }
      throw CliError("config_mismatch", "config hash " + config.hash() +
                                            " does not match the run's " + stored.hash() +
                                            "; differing keys:" + keys);
    }
    const nlohmann::json info = nlohmann::json::parse(read_text(root / "run.json"));
    dir.run_id_ = info.at("run_id").get<std::string>();
  } else {
    fs::create_directories(root);
    dir.run_id_ = root.filename().string() + "-" + config.hash().substr(0, 8);
    write_text_atomic(snapshot, config.serialize());
    write_text_atomic(root / "run.json",
                      nlohmann::json{{"run_id", dir.run_id_}, {"config_hash", config.hash()}}
                              .dump(2) +
                          "\n");
  }
  for (const fs::path& sub : {dir.checkpoints(), dir.logs(), dir.plots(), dir.scenes()}) {
    fs::create_directories(sub);
  }
  return dir;
}

RunDirectory RunDirectory::existing(const fs::path& root) {
  const fs::path snapshot = root / "config.txt";
  if (!fs::exists(snapshot)) {
    throw CliError("missing_run", root.string() + " is not a run directory (no config.txt)");
  }
  return open(root, RunConfig::parse(read_text(snapshot)));
}

fs::path RunDirectory::checkpoint_path(Stage stage, int episode) const {
  char name[64];
  std::snprintf(name, sizeof(name), "%s_ep%05d.ckpt", to_string(stage), episode);
  return checkpoints() / name;
}

std::optional<fs::path> RunDirectory::latest_checkpoint(Stage stage) const {
  std::optional<fs::path> best;
  int best_episode = -1;
  if (!fs::exists(checkpoints())) return best;
  for (const auto& entry : fs::directory_iterator(checkpoints())) {
    const auto ep = checkpoint_episode(entry.path(), stage);
    if (ep && *ep > best_episode) {
      best_episode = *ep;
      best = entry.path();
    }
  }
  return best;
}

std::optional<fs::path> RunDirectory::completed_checkpoint(Stage stage) const {
  const auto latest = latest_checkpoint(stage);
  if (!latest) return latest;
  const CheckpointMeta meta = read_meta(latest->string());
  const auto it = meta.extra.find("stage_complete");
  if (it != meta.extra.end() && it->second == "1") return latest;
  return std::nullopt;
}

}  // namespace pushgrasp
