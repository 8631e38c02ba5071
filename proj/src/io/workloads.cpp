#include "blockflow/workloads.hpp"

#include <random>
#include <vector>

namespace blockflow {

namespace {

std::string rand_stmt(const std::string& id, std::size_t n, std::size_t m) {
  return id + " = RAND(" + std::to_string(n) + ", " + std::to_string(m) + ")\n";
}

// Pairwise MADD reduction of `names`; returns the root name.
std::string reduce(std::vector<std::string> names, const std::string& prefix, std::string& out) {
  std::size_t next = 0;
  while (names.size() > 1) {
    std::vector<std::string> level;
    for (std::size_t i = 0; i + 1 < names.size(); i += 2) {
      std::string id = prefix + std::to_string(next++);
      out += id + " = MADD(" + names[i] + ", " + names[i + 1] + ")\n";
      level.push_back(id);
    }
    if (names.size() % 2) level.push_back(names.back());
    names = std::move(level);
  }
  return names.front();
}

}  // namespace

std::string synth_chains_script(std::size_t chains, std::size_t length, std::size_t n) {
  std::string s = "# " + std::to_string(chains) + " independent chains of " +
                  std::to_string(length) + " products, " + std::to_string(n) + "x" +
                  std::to_string(n) + "\n";
  std::vector<std::string> ends;
  for (std::size_t c = 0; c < chains; ++c) {
    const std::string a = "A" + std::to_string(c), b = "B" + std::to_string(c);
    s += rand_stmt(a, n, n) + rand_stmt(b, n, n);
    std::string x = a;
    for (std::size_t j = 0; j < length; ++j) {
      std::string y = "X" + std::to_string(c) + "_" + std::to_string(j);
      s += y + " = MMUL(" + x + ", " + b + ")\n";
      x = y;
    }
    ends.push_back(x);
  }
  const std::string root = reduce(ends, "S", s);
  s += "PRINT(" + root + ")\n";
  return s;
}

std::string matmul_traces_script(std::size_t traces, std::uint64_t seed, std::size_t max_dim) {
  std::mt19937_64 rng(seed);
  auto dim = [&] {
    std::uniform_int_distribution<std::size_t> d(max_dim / 3, max_dim);
    return d(rng);
  };
  std::string s;
  for (std::size_t t = 0; t < traces; ++t) {
    const std::string p = "T" + std::to_string(t) + "_";
    const std::size_t n = dim(), m = dim(), k = dim();
    s += rand_stmt(p + "A", n, m) + rand_stmt(p + "B", m, k) + rand_stmt(p + "C", n, k) +
         rand_stmt(p + "D", k, k);
    s += p + "P = MMUL(" + p + "A, " + p + "B)\n";
    s += p + "Q = MADD(" + p + "P, " + p + "C)\n";
    s += p + "R = MMUL(" + p + "Q, " + p + "D)\n";
    s += p + "U = SIN(" + p + "R)\n";
    s += p + "V = MMUL(" + p + "U, " + p + "D)\n";
    s += p + "W = EMUL(" + p + "V, " + p + "C)\n";
    s += "PRINT(" + p + "W)\n";
  }
  return s;
}

std::string chain_heavy_script(std::size_t chains, std::size_t length, std::size_t n,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string s;
  std::vector<std::string> ends;
  for (std::size_t c = 0; c < chains; ++c) {
    const std::string a = "A" + std::to_string(c), b = "B" + std::to_string(c);
    s += rand_stmt(a, n, n) + rand_stmt(b, n, n);
    std::string x = a;
    for (std::size_t j = 0; j < length; ++j) {
      std::string y = "C" + std::to_string(c) + "_" + std::to_string(j);
      switch (rng() % 4) {
        case 0: s += y + " = MMUL(" + x + ", " + b + ")\n"; break;
        case 1: s += y + " = MADD(" + x + ", " + b + ")\n"; break;
        case 2: s += y + " = SMUL(" + x + ", 0.5)\n"; break;
        default: s += y + " = COS(" + x + ")\n"; break;
      }
      x = y;
    }
    ends.push_back(x);
  }
  const std::string root = reduce(ends, "S", s);
  s += "PRINT(" + root + ")\n";
  return s;
}

}  // namespace blockflow
