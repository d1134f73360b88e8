// Copyright 2026 the svtpm-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svtpm/harness.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "temp_dir.hpp"

namespace svtpm {
namespace {

constexpr uint64_t kSeed = 7;

Verdict must_run(const fs::path& base, const Scenario& s,
                 uint64_t seed = kSeed) {
  auto v = run_scenario(base, s, seed);
  EXPECT_TRUE(v.ok()) << err_name(v.error());
  return v.ok() ? *v : Verdict{};
}

const RunStats& stats_of(const Verdict& v) { return v.stats; }

TEST(Builtins, FiveDistinctRunnableScenarios) {
  auto list = builtin_scenarios(DefensePreset::Counter);
  ASSERT_EQ(list.size(), 5u);
  std::set<std::string> names;
  for (const auto& s : list) {
    names.insert(s.name);
    EXPECT_FALSE(s.events.empty()) << s.name;
    EXPECT_FALSE(s.success_checks.empty()) << s.name;
    EXPECT_EQ(s.defense, DefensePreset::Counter);
  }
  EXPECT_EQ(names.size(), 5u);
  EXPECT_TRUE(names.count("nvram-replacement"));
  EXPECT_TRUE(names.count("rollback-dictionary"));
  EXPECT_TRUE(names.count("clock-skip"));
  EXPECT_TRUE(names.count("rogue-attestation"));
  EXPECT_TRUE(names.count("sync-interruption"));
}

TEST(Builtins, PresetNamesRoundtrip) {
  for (auto d : {DefensePreset::Off, DefensePreset::Software,
                 DefensePreset::Counter}) {
    auto back = defense_from_name(defense_name(d));
    ASSERT_TRUE(back.ok());
    EXPECT_EQ(*back, d);
  }
  ASSERT_TRUE(defense_from_name("full").ok());
  EXPECT_EQ(*defense_from_name("full"), DefensePreset::Counter);
  EXPECT_EQ(defense_from_name("maximal").error(), Err::BadParam);
}

TEST(Builtins, ExpectedMatrixShape) {
  for (const char* name :
       {"nvram-replacement", "rollback-dictionary", "clock-skip",
        "rogue-attestation", "sync-interruption"}) {
    EXPECT_TRUE(scenario_expected_success(name, DefensePreset::Off)) << name;
    EXPECT_FALSE(scenario_expected_success(name, DefensePreset::Counter))
        << name;
    bool soft = scenario_expected_success(name, DefensePreset::Software);
    EXPECT_EQ(soft, std::string(name) == "sync-interruption") << name;
  }
}

// The headline property: every builtin attack succeeds with its defense
// disabled and fails with it enabled, except the sync interruption which
// also beats the software ledger.
TEST(Matrix, MatchesTheExpectedOutcomes) {
  TempDir tmp;
  for (auto d : {DefensePreset::Off, DefensePreset::Software,
                 DefensePreset::Counter}) {
    for (const Scenario& s : builtin_scenarios(d, 6, 4)) {
      Verdict v = must_run(tmp.path(), s);
      EXPECT_EQ(v.attack_succeeded, scenario_expected_success(s.name, d))
          << s.name << " under " << defense_name(d) << "\n"
          << report({v});
    }
  }
}

TEST(Determinism, SameSeedReplaysTheSameVerdict) {
  TempDir tmp;
  Scenario s = rollback_dictionary_scenario(DefensePreset::Counter, 4);
  Verdict first = must_run(tmp.path(), s, 11);
  Verdict second = must_run(tmp.path(), s, 11);
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.stats.trace, second.stats.trace);
}

TEST(Replacement, SealedStackRefusesBothSwapLevels) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(),
                       nvram_replacement_scenario(DefensePreset::Counter));
  EXPECT_FALSE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).boots_attempted, 2u);
  EXPECT_EQ(stats_of(v).boots_accepted, 0u);
  EXPECT_EQ(stats_of(v).plaintext_recoveries, 0u);
  ASSERT_EQ(v.checks.size(), 2u);
  EXPECT_EQ(v.checks[0].name, "foreign-plaintext-recovered");
  EXPECT_FALSE(v.checks[0].tripped);
  EXPECT_EQ(v.checks[1].name, "replaced-stack-booted");
  EXPECT_FALSE(v.checks[1].tripped);
}

TEST(Replacement, PlainStackLeaksTheVictimSecret) {
  TempDir tmp;
  Verdict v =
      must_run(tmp.path(), nvram_replacement_scenario(DefensePreset::Off));
  EXPECT_TRUE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).boots_accepted, 2u);
  EXPECT_EQ(stats_of(v).tainted_boots_accepted, 2u);
  EXPECT_GE(stats_of(v).plaintext_recoveries, 2u);
  EXPECT_TRUE(v.checks[0].tripped);
  EXPECT_TRUE(v.checks[1].tripped);
}

TEST(Dictionary, CounterHoldsTheGuessBound) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(),
                       rollback_dictionary_scenario(DefensePreset::Counter, 6));
  EXPECT_FALSE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), stats_of(v).max_tries);
  EXPECT_EQ(stats_of(v).guesses_attempted, 8u);
  EXPECT_EQ(stats_of(v).guesses_blocked, 5u);
  EXPECT_LE(stats_of(v).max_guesses_in_interval(), stats_of(v).max_tries);
}

TEST(Dictionary, UnguardedStackGivesUnboundedGuesses) {
  TempDir tmp;
  Verdict v =
      must_run(tmp.path(), rollback_dictionary_scenario(DefensePreset::Off, 6));
  EXPECT_TRUE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), 8u);
  EXPECT_EQ(stats_of(v).guesses_blocked, 0u);
  EXPECT_GT(stats_of(v).max_guesses_in_interval(), stats_of(v).max_tries);
}

TEST(ClockSkip, TrustedClockIgnoresHostSkew) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(), clock_skip_scenario(DefensePreset::Counter));
  EXPECT_FALSE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), 3u);
  EXPECT_EQ(stats_of(v).guesses_blocked, 2u);
}

TEST(ClockSkip, HostClockStackLetsTheLockoutExpireEarly) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(), clock_skip_scenario(DefensePreset::Off));
  EXPECT_TRUE(v.attack_succeeded);
  // All five guesses were evaluated although virtual time never moved, so
  // they all land in one recovery window.
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), 5u);
  EXPECT_EQ(stats_of(v).max_guesses_in_interval(), 5u);
}

TEST(Attestation, VerifierRejectsEveryTamperedFlow) {
  TempDir tmp;
  Verdict v =
      must_run(tmp.path(), rogue_attestation_scenario(DefensePreset::Counter));
  EXPECT_FALSE(v.attack_succeeded);
  // Honest issuance plus the burned first presentation of the replay.
  EXPECT_EQ(stats_of(v).certs_issued, 2u);
  EXPECT_EQ(stats_of(v).rogue_certs, 0u);
  const auto& trace = stats_of(v).trace;
  auto has = [&](const std::string& needle) {
    for (const auto& line : trace)
      if (line.find(needle) != std::string::npos) return true;
    return false;
  };
  EXPECT_TRUE(has("attest honest -> issued"));
  EXPECT_TRUE(has("attest patched -> REJECT_UNKNOWN_MEASUREMENT"));
  EXPECT_TRUE(has("attest replay -> REJECT_STALE_NONCE"));
  EXPECT_TRUE(has("attest forged -> REJECT_BAD_SIGNATURE"));
}

TEST(Attestation, PlainStackIssuesOnSight) {
  TempDir tmp;
  Verdict v =
      must_run(tmp.path(), rogue_attestation_scenario(DefensePreset::Off));
  EXPECT_TRUE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).certs_issued, 4u);
  EXPECT_EQ(stats_of(v).rogue_certs, 3u);
}

TEST(Interruption, SoftwareLedgerLosesTheRace) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(),
                       sync_interruption_scenario(DefensePreset::Software, 4));
  EXPECT_TRUE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), 6u);
  EXPECT_EQ(stats_of(v).guesses_blocked, 0u);
}

TEST(Interruption, HardwareCounterLeavesNoSeam) {
  TempDir tmp;
  Verdict v = must_run(tmp.path(),
                       sync_interruption_scenario(DefensePreset::Counter, 4));
  EXPECT_FALSE(v.attack_succeeded);
  EXPECT_EQ(stats_of(v).guess_times_ms.size(), 3u);
  EXPECT_EQ(stats_of(v).guesses_blocked, 3u);
}

TEST(Script, StructurallyInvalidScriptsAreRejected) {
  TempDir tmp;
  auto run_events = [&](std::vector<Event> events, const char* tag) {
    Scenario s;
    s.name = std::string("bad-") + tag;
    s.defense = DefensePreset::Counter;
    s.events = std::move(events);
    return run_scenario(tmp.path(), s, kSeed);
  };

  auto boot_unknown = run_events({Event::boot("ghost")}, "boot");
  ASSERT_FALSE(boot_unknown.ok());
  EXPECT_EQ(boot_unknown.error(), Err::BadScript);

  auto dup = run_events({Event::provision("a"), Event::provision("a")}, "dup");
  ASSERT_FALSE(dup.ok());
  EXPECT_EQ(dup.error(), Err::BadScript);

  auto slash = run_events({Event::provision("a/b")}, "slash");
  ASSERT_FALSE(slash.ok());
  EXPECT_EQ(slash.error(), Err::BadScript);

  auto bad_token = run_events(
      {Event::provision("a"), Event::provision("b"),
       Event::file_swap("a/kernel", "b/kernel")},
      "token");
  ASSERT_FALSE(bad_token.ok());
  EXPECT_EQ(bad_token.error(), Err::BadScript);

  auto bad_variant = run_events(
      {Event::provision("a"), Event::boot("a"), Event::attest("sideways")},
      "variant");
  ASSERT_FALSE(bad_variant.ok());
  EXPECT_EQ(bad_variant.error(), Err::BadScript);

  auto snap_unknown = run_events({Event::snapshot("ghost")}, "snap");
  ASSERT_FALSE(snap_unknown.ok());
  EXPECT_EQ(snap_unknown.error(), Err::BadScript);
}

TEST(Script, EventsAgainstARefusedInstanceAreInertNotErrors) {
  TempDir tmp;
  // Swap NVRAM images under the full defense: the boot is refused, and the
  // probe command afterwards must be recorded as skipped, not crash or err.
  Scenario s;
  s.name = "refused-then-probe";
  s.defense = DefensePreset::Counter;
  s.events = {Event::provision("victim"), Event::provision("mallory"),
              Event::file_swap("victim/nvram", "mallory/nvram"),
              Event::boot("mallory"),
              Event::command(client::nv_read(kMarkerIndex)),
              Event::guess("whatever")};
  Verdict v = must_run(tmp.path(), s);
  EXPECT_EQ(v.stats.boots_accepted, 0u);
  EXPECT_EQ(v.stats.guesses_attempted, 0u);
  bool saw_skip = false;
  for (const auto& line : v.stats.trace)
    saw_skip = saw_skip || line.find("skipped") != std::string::npos;
  EXPECT_TRUE(saw_skip);
}

TEST(Report, EmptyInputGivesEmptySummary) {
  EXPECT_EQ(report({}), "");
}

TEST(Report, OneStableLinePerVerdict) {
  TempDir tmp;
  std::vector<Verdict> verdicts;
  verdicts.push_back(
      must_run(tmp.path(), clock_skip_scenario(DefensePreset::Off)));
  verdicts.push_back(
      must_run(tmp.path(), clock_skip_scenario(DefensePreset::Counter)));
  std::string text = report(verdicts);
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0].rfind("scenario=clock-skip defense=off succeeded=1", 0),
            0u);
  EXPECT_EQ(
      lines[1].rfind("scenario=clock-skip defense=counter succeeded=0", 0),
      0u);
  for (const auto& line : lines) {
    EXPECT_NE(line.find(" window_max="), std::string::npos);
    EXPECT_NE(line.find(" check:guess-window-exceeds-max-tries="),
              std::string::npos);
  }
  EXPECT_EQ(report(verdicts), text);
}

}  // namespace
}  // namespace svtpm
