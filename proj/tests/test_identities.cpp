#include <gtest/gtest.h>

#include <set>

#include "bxr/identities.hpp"

using namespace bxr;

TEST(Identities, ReducedSuitePasses) {
  IdentityConfig cfg;
  cfg.pairs = 8;
  cfg.lightsink_pairs = 2;
  auto rows = run_identity_suite(cfg);
  ASSERT_FALSE(rows.empty());
  std::set<std::string> names;
  for (const auto& r : rows) {
    names.insert(r.name);
    EXPECT_TRUE(r.pass) << r.name << " residual " << r.residual;
    EXPECT_FALSE(r.anchor.empty());
  }
  EXPECT_EQ(names.size(), rows.size());
}

TEST(Identities, CoarseIntegratorFailsPseudolinearisation) {
  IdentityConfig cfg;
  cfg.pairs = 4;
  cfg.steps = 2;
  cfg.include_lightsink = false;
  bool failed = false;
  for (const auto& r : transport_identities(cfg)) {
    if (r.name.find("pseudolin") != std::string::npos && !r.pass) failed = true;
  }
  EXPECT_TRUE(failed);
}

TEST(Identities, CsvHeader) {
  IdentityCheck c{"row", "a = b", 1e-9, 1e-6, true};
  const std::string csv = identity_csv({c});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "name,identity,residual,tolerance,pass");
}
