#pragma once

#include "crelab/common/rng.hpp"
#include "crelab/tinylm/model.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("crelab_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

// Random probability vector; `peaked` sharpens it.
inline std::vector<float> random_dist(crelab::Rng& rng, std::size_t n, double peaked = 1.0) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& x : w) {
    x = std::exp(peaked * crelab::standard_normal(rng));
    total += x;
  }
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(w[i] / total);
  return out;
}

// Trace with only early-exit distributions filled in.
inline crelab::tinylm::LayerTrace random_trace(crelab::Rng& rng, int n_layers, std::size_t vocab) {
  crelab::tinylm::LayerTrace t;
  for (int l = 0; l < n_layers; ++l) t.early_exit_dists.push_back(random_dist(rng, vocab, 2.0));
  return t;
}

}  // namespace testutil
