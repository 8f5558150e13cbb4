#include "run_dir.hpp"

#include "eigenglue/error.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <memory>
#include <sstream>

#ifndef EIGENGLUE_VERSION
#define EIGENGLUE_VERSION "0.0.0"
#endif

namespace eigenglue::cli {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Sha256 {
public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw NumericalError("sha256: init failed");
  }
  void update(const char* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    std::string out;
    char b[3];
    for (unsigned int i = 0; i < len; ++i) {
      std::snprintf(b, sizeof b, "%02x", md[i]);
      out += b;
    }
    return out;
  }

private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

} // namespace

std::string sha256_hex(const std::string& bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

RunDir::RunDir(std::filesystem::path dir, std::string command, std::vector<std::string> argv, std::uint64_t seed)
    : dir_(std::move(dir)), command_(std::move(command)), argv_(std::move(argv)), seed_(seed), started_(utc_now()) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ValidationError("cannot create run directory '" + dir_.string() + "': " + ec.message());
}

void RunDir::set_config(const std::filesystem::path& config) {
  config_ = config.string();
  add_input(config);
}

void RunDir::add_input(const std::filesystem::path& file) {
  inputs_.push_back({std::filesystem::absolute(file).lexically_normal().string(), sha256_file(file), false});
}

void RunDir::add_builtin(const std::string& spec) { inputs_.push_back({spec, sha256_hex("builtin:" + spec), true}); }

void RunDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + (dir_ / name).string() + "'");
  out << content;
  if (std::find(outputs_.begin(), outputs_.end(), name) == outputs_.end()) outputs_.push_back(name);
}

std::ofstream& RunDir::stream(const std::string& name) {
  streams_.emplace_back(name, std::ofstream(dir_ / name, std::ios::binary));
  if (!streams_.back().second) throw ValidationError("cannot write '" + (dir_ / name).string() + "'");
  outputs_.push_back(name);
  return streams_.back().second;
}

void RunDir::finish(int exit_code, const std::string& error) {
  if (finished_) return;
  finished_ = true;
  for (auto& [name, s] : streams_) s.close();
  nlohmann::ordered_json j;
  j["tool"] = "eigenglue";
  j["version"] = EIGENGLUE_VERSION;
  j["command"] = command_;
  j["argv"] = argv_;
  j["config"] = config_.empty() ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(config_);
  j["seed"] = seed_;
  auto in = nlohmann::ordered_json::array();
  std::ostringstream all;
  for (const auto& a : argv_) all << a << '\0';
  for (const auto& i : inputs_) {
    nlohmann::ordered_json e;
    e[i.builtin ? "builtin" : "path"] = i.label;
    e["sha256"] = i.sha256;
    in.push_back(e);
    all << i.sha256 << '\0';
  }
  j["inputs"] = in;
  j["inputs_sha256"] = sha256_hex(all.str());
  j["started_utc"] = started_;
  j["finished_utc"] = utc_now();
  auto out = nlohmann::ordered_json::array();
  for (const auto& name : outputs_) {
    std::error_code ec;
    if (!std::filesystem::exists(dir_ / name, ec)) continue;
    out.push_back({{"path", name}, {"sha256", sha256_file(dir_ / name)}});
  }
  j["outputs"] = out;
  j["exit_code"] = exit_code;
  j["status"] = exit_code == 0 ? "ok" : "error";
  if (!error.empty()) j["error"] = error;
  std::ofstream f(dir_ / "manifest.json", std::ios::binary);
  f << j.dump(2) << '\n';
}

} // namespace eigenglue::cli
