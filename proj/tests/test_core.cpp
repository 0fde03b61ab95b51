#include <atomic>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "mol/core/parallel.hpp"
#include "mol/core/rng.hpp"

namespace {

TEST(Rng, NamedStreamsAreReproducibleAndDistinct) {
  auto a = mol::rng::stream(42, "bootstrap", 3);
  auto b = mol::rng::stream(42, "bootstrap", 3);
  auto c = mol::rng::stream(42, "bootstrap", 4);
  auto d = mol::rng::stream(43, "bootstrap", 3);
  const auto x = a();
  EXPECT_EQ(x, b());
  EXPECT_NE(x, c());
  EXPECT_NE(x, d());
}

TEST(Rng, DerivePathMatchesNestedDerive) {
  EXPECT_EQ(mol::rng::derive_path(7, {1, 2}), mol::rng::derive(mol::rng::derive(7, 1), 2));
  EXPECT_NE(mol::rng::derive(7, "folds"), mol::rng::derive(7, "features"));
}

TEST(Parallel, VisitsEveryIndexOnceForAnyWorkerCount) {
  for (unsigned workers : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(97);
    mol::parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i]++; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
}

TEST(Parallel, PerIndexStreamsGiveWorkerIndependentResults) {
  auto run = [](unsigned workers) {
    std::vector<double> out(64);
    mol::parallel_for(out.size(), workers, [&](std::size_t i) {
      auto eng = mol::rng::stream(9, "work", i);
      out[i] = std::normal_distribution<double>()(eng);
    });
    return out;
  };
  EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, RethrowsBodyExceptions) {
  EXPECT_THROW(mol::parallel_for(10, 3, [](std::size_t i) {
                 if (i == 6) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

}  // namespace
