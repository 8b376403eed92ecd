#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "pushgrasp/run_config.hpp"

namespace pushgrasp {

namespace fs = std::filesystem;

// Error with a machine-readable category, printed by the CLI as
// `error[<category>]: <message>`.
class CliError : public std::runtime_error {
 public:
  CliError(std::string category, const std::string& message, int exit_code = 2)
      : std::runtime_error(message), category_(std::move(category)), exit_code_(exit_code) {}
  const std::string& category() const { return category_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string category_;
  int exit_code_;
};

// Exclusive single-writer lock on a run directory. A lock left behind by a
// process that no longer exists is taken over.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  fs::path path_;
};

// Appends JSON records, one per line, flushing after each record.
class JsonlWriter {
 public:
  explicit JsonlWriter(const fs::path& path);
  ~JsonlWriter();
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  void write(const nlohmann::json& record);
  // Bytes in the file after the last complete record.
  std::uintmax_t size() const { return size_; }

 private:
  std::FILE* file_ = nullptr;
  std::uintmax_t size_ = 0;
};

// Throws CliError("parse") naming the 1-based line of the first bad record.
std::vector<nlohmann::json> read_jsonl(const fs::path& path);

// Drops everything after `size` bytes (used to discard records written after
// the checkpoint a run resumes from).
void truncate_file(const fs::path& path, std::uintmax_t size);

// Layout:
//   config.txt    effective config (key=value)
//   run.json      run_id, config hash
//   checkpoints/  <stage>_ep<N>.ckpt (+ .meta)
//   logs/         train.jsonl
//   scenes/, plots/, eval/
class RunDirectory {
 public:
  // Creates the directory or opens an existing one. An existing run whose
  // config hash differs from `config` is refused with the differing keys.
  static RunDirectory open(const fs::path& root, const RunConfig& config);
  // Opens an existing run and loads its snapshot config.
  static RunDirectory existing(const fs::path& root);

  const fs::path& root() const { return root_; }
  const std::string& run_id() const { return run_id_; }
  const RunConfig& config() const { return config_; }
  std::string config_hash() const { return config_.hash(); }

  fs::path checkpoints() const { return root_ / "checkpoints"; }
  fs::path logs() const { return root_ / "logs"; }
  fs::path plots() const { return root_ / "plots"; }
  fs::path scenes() const { return root_ / "scenes"; }
  fs::path train_log() const { return logs() / "train.jsonl"; }

  fs::path checkpoint_path(Stage stage, int episode) const;
  // Newest checkpoint of a stage (by episode), if any.
  std::optional<fs::path> latest_checkpoint(Stage stage) const;
  // Newest checkpoint of a stage that was written at stage end.
  std::optional<fs::path> completed_checkpoint(Stage stage) const;

 private:
  fs::path root_;
  std::string run_id_;
  RunConfig config_;
};

std::string read_text(const fs::path& path);
void write_text_atomic(const fs::path& path, const std::string& text);

}  // namespace pushgrasp
