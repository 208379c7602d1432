#include <doctest.h>

#include <cmath>

#include "taps/metrics.hpp"
#include "taps/util.hpp"

using namespace taps;

namespace {

// Independent scoring oracle: naive O(n^2) matching over gold triplets with
// a used[] mask, normalization re-derived from first principles.
std::string oracle_norm(std::string s) {
  std::string collapsed;
  bool ws = true;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      ws = true;
      continue;
    }
    if (ws && !collapsed.empty()) collapsed.push_back(' ');
    collapsed.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    ws = false;
  }
  return collapsed;
}

bool oracle_equal(const SlotTriplet& a, const SlotTriplet& b) {
  return oracle_norm(a.function) == oracle_norm(b.function) &&
         oracle_norm(a.argument) == oracle_norm(b.argument) &&
         oracle_norm(a.value) == oracle_norm(b.value);
}

InstanceScore oracle_score(const std::vector<ApiCall>& pred, const std::vector<ApiCall>& gold) {
  std::vector<SlotTriplet> pt = to_triplets(pred);
  std::vector<SlotTriplet> gt = to_triplets(gold);
  InstanceScore score;
  if (pt.empty() && gt.empty()) {
    score.exact_match = score.precision = score.recall = score.f1 = 1.0;
    return score;
  }
  if (pt.empty() || gt.empty()) return score;

  std::vector<bool> used(gt.size(), false);
  std::size_t matched = 0;
  for (const auto& p : pt) {
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (!used[i] && oracle_equal(p, gt[i])) {
        used[i] = true;
        ++matched;
        break;
      }
    }
  }
  score.precision = static_cast<double>(matched) / static_cast<double>(pt.size());
  score.recall = static_cast<double>(matched) / static_cast<double>(gt.size());
  score.f1 = (score.precision + score.recall > 0)
                 ? 2 * score.precision * score.recall / (score.precision + score.recall)
                 : 0.0;
  score.exact_match = (matched == pt.size() && matched == gt.size()) ? 1.0 : 0.0;
  return score;
}

std::vector<ApiCall> random_calls(Rng& rng, std::size_t max_calls, std::size_t max_args) {
  static const std::vector<std::string> functions = {"GetHomes", "GetEvents", "GetMedia"};
  static const std::vector<std::string> args = {"area", "city", "genre", "date"};
  static const std::vector<std::string> values = {"1",     "Hayward", "funny", "Blues",
                                                  "12:00", "any",     "?"};
  std::vector<ApiCall> calls;
  std::size_t n = rng.uniform_int(max_calls + 1);
  for (std::size_t c = 0; c < n; ++c) {
    ApiCall call;
    call.function = functions[rng.uniform_int(functions.size())];
    std::size_t argc = rng.uniform_int(max_args + 1);
    for (std::size_t a = 0; a < argc; ++a) {
      std::string name = args[rng.uniform_int(args.size())];
      bool dup = false;
      for (const auto& [existing, _] : call.arguments) dup = dup || existing == name;
      if (dup) continue;
      call.arguments.emplace_back(name, values[rng.uniform_int(values.size())]);
    }
    calls.push_back(std::move(call));
  }
  return calls;
}

}  // namespace

TEST_CASE("identity scores full marks") {
  std::vector<ApiCall> calls = {ApiCall{"GetMedia", {{"genre", "funny"}}}};
  InstanceScore s = score_instance(calls, calls);
  CHECK(s.exact_match == 1.0);
  CHECK(s.f1 == 1.0);
  CHECK(s.precision == 1.0);
  CHECK(s.recall == 1.0);
}

TEST_CASE("semantic substitution fixture scores one half") {
  std::vector<ApiCall> pred = {
      ApiCall{"GetHomes", {{"city", "Hayward"}, {"number_of_beds", "1"}}}};
  std::vector<ApiCall> gold = {
      ApiCall{"GetHomes", {{"area", "Hayward"}, {"number_of_beds", "1"}}}};
  InstanceScore s = score_instance(pred, gold);
  CHECK(s.precision == 0.5);
  CHECK(s.recall == 0.5);
  CHECK(s.f1 == 0.5);
  CHECK(s.exact_match == 0.0);
}

TEST_CASE("empty-side conventions") {
  std::vector<ApiCall> media = {ApiCall{"GetMedia", {{"genre", "funny"}}}};
  InstanceScore none_vs_gold = score_instance({}, media);
  CHECK(none_vs_gold.precision == 0.0);
  CHECK(none_vs_gold.recall == 0.0);
  CHECK(none_vs_gold.f1 == 0.0);
  CHECK(none_vs_gold.exact_match == 0.0);

  InstanceScore both_empty = score_instance({}, {});
  CHECK(both_empty.exact_match == 1.0);
  CHECK(both_empty.f1 == 1.0);
}

TEST_CASE("swapping pred and gold swaps precision and recall") {
  Rng rng(99);
  for (int i = 0; i < 50; ++i) {
    auto a = random_calls(rng, 3, 4);
    auto b = random_calls(rng, 3, 4);
    InstanceScore ab = score_instance(a, b);
    InstanceScore ba = score_instance(b, a);
    CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-12));
    CHECK(ab.recall == doctest::Approx(ba.precision).epsilon(1e-12));
    CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-12));
    CHECK(ab.exact_match == ba.exact_match);
  }
}

TEST_CASE("adding a gold-covered triplet never lowers recall") {
  std::vector<ApiCall> gold = {
      ApiCall{"GetHomes", {{"area", "Hayward"}, {"number_of_beds", "1"}}}};
  std::vector<ApiCall> pred = {ApiCall{"GetHomes", {{"area", "Hayward"}}}};
  double before = score_instance(pred, gold).recall;
  pred[0].arguments.emplace_back("number_of_beds", "1");
  double after = score_instance(pred, gold).recall;
  CHECK(after >= before);
}

TEST_CASE("brute-force oracle equivalence on 200 random instances") {
  Rng rng(20240101);
  for (int i = 0; i < 200; ++i) {
    auto pred = random_calls(rng, 3, 4);
    auto gold = random_calls(rng, 3, 4);
    InstanceScore fast = score_instance(pred, gold);
    InstanceScore slow = oracle_score(pred, gold);
    CHECK(fast.exact_match == slow.exact_match);
    CHECK(fast.precision == doctest::Approx(slow.precision).epsilon(1e-12));
    CHECK(fast.recall == doctest::Approx(slow.recall).epsilon(1e-12));
    CHECK(fast.f1 == doctest::Approx(slow.f1).epsilon(1e-12));
  }
}

TEST_CASE("set mode deduplicates") {
  std::vector<ApiCall> twice = {ApiCall{"GetMedia", {{"genre", "funny"}}},
                                ApiCall{"GetMedia", {{"genre", "funny"}}}};
  std::vector<ApiCall> once = {ApiCall{"GetMedia", {{"genre", "funny"}}}};
  InstanceScore multi = score_instance(twice, once);
  CHECK(multi.precision == 0.5);
  CHECK(multi.exact_match == 0.0);
  InstanceScore set = score_instance(twice, once, ScoreOptions{true});
  CHECK(set.precision == 1.0);
  CHECK(set.exact_match == 1.0);
}

TEST_CASE("aggregate means and type breakdown") {
  std::vector<InstanceScore> scores(2);
  scores[0].f1 = 1.0;
  scores[0].exact_match = 1.0;
  scores[1].f1 = 0.0;
  Report report = aggregate(scores);
  CHECK(report.overall.f1 == doctest::Approx(50.0));
  CHECK(report.overall.exact_match == doctest::Approx(50.0));

  Report typed = aggregate(scores, {"Plain", "Conflict"});
  CHECK(typed.by_type.at("Plain").f1 == doctest::Approx(100.0));
  CHECK(typed.by_type.at("Conflict").f1 == doctest::Approx(0.0));
  CHECK(typed.by_type.at("Plain").count == 1);

  CHECK_THROWS_AS(aggregate(scores, {"Plain"}), Error);

  SUBCASE("identical instances collapse to the same mean") {
    std::vector<InstanceScore> same(4, scores[0]);
    Report r = aggregate(same, {"Plain", "Plain", "Conflict", "Conflict"});
    CHECK(r.by_type.at("Plain").f1 == doctest::Approx(r.overall.f1));
  }
}

TEST_CASE("win same loss") {
  WinSameLoss even = win_same_loss({0.5}, {0.5}, 0.0);
  CHECK(even.win == 0.0);
  CHECK(even.same == 100.0);
  CHECK(even.loss == 0.0);

  WinSameLoss split = win_same_loss({0.2, 0.9}, {0.8, 0.3}, 0.0);
  CHECK(split.win == 50.0);
  CHECK(split.same == 0.0);
  CHECK(split.loss == 50.0);

  // 0.009 sits inside the tolerance band, 0.02 outside.
  WinSameLoss tol = win_same_loss({0.50, 0.50}, {0.509, 0.52}, 0.01);
  CHECK(tol.win == 50.0);
  CHECK(tol.same == 50.0);
  CHECK(tol.loss == 0.0);

  CHECK_THROWS_AS(win_same_loss({0.1}, {0.1, 0.2}, 0.0), Error);
  CHECK(win_same_loss({0.1, 0.2}, {0.3, 0.4}, 0.0).win +
            win_same_loss({0.1, 0.2}, {0.3, 0.4}, 0.0).same +
            win_same_loss({0.1, 0.2}, {0.3, 0.4}, 0.0).loss ==
        doctest::Approx(100.0));
}

TEST_CASE("pearson basics") {
  std::vector<double> xs;
  std::vector<double> ys;
  for (int i = 1; i <= 10; ++i) {
    xs.push_back(i);
    ys.push_back(2.0 * i + 1.0);
  }
  PearsonResult up = pearson(xs, ys);
  CHECK(up.r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(up.p <= 1e-9);

  std::vector<double> neg;
  for (double x : xs) neg.push_back(-x);
  CHECK(pearson(xs, neg).r == doctest::Approx(-1.0).epsilon(1e-12));

  // r = cov/(sx*sy) = 4/5; p = 2*St(2).sf(0.8*sqrt(2/0.36)) = 0.2 exactly.
  PearsonResult hand = pearson({1, 2, 3, 4}, {1, 3, 2, 4});
  CHECK(hand.r == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(hand.p == doctest::Approx(0.2).epsilon(1e-9));

  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), Error);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), Error);
}

TEST_CASE("pearson matches the covariance-formula oracle") {
  Rng rng(7777);
  for (int iter = 0; iter < 30; ++iter) {
    std::size_t n = 3 + rng.uniform_int(98);
    std::vector<double> xs;
    std::vector<double> ys;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(rng.uniform_real() * 10.0 - 5.0);
      ys.push_back(rng.uniform_real() * 4.0 + 0.5 * xs.back());
    }
    double mx = 0;
    double my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += xs[i];
      my += ys[i];
    }
    mx /= n;
    my /= n;
    double cov = 0;
    double vx = 0;
    double vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      cov += (xs[i] - mx) * (ys[i] - my);
      vx += (xs[i] - mx) * (xs[i] - mx);
      vy += (ys[i] - my) * (ys[i] - my);
    }
    double expected = cov / std::sqrt(vx * vy);
    CHECK(pearson(xs, ys).r == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("report serialization round trip") {
  std::vector<InstanceScore> scores(3);
  scores[0].f1 = 1.0;
  scores[1].f1 = 0.5;
  scores[2].f1 = 0.25;
  Report report = aggregate(scores, {"Plain", "Plain", "Conflict"});
  report.tool_invocation_rate = 33.3;
  report.failures = 1;

  Report back = report_from_json(report_to_json(report));
  CHECK(back.overall.f1 == doctest::Approx(report.overall.f1));
  CHECK(back.by_type.size() == 2);
  CHECK(back.tool_invocation_rate == doctest::Approx(33.3));
  CHECK(back.failures == 1);

  CHECK(format_report_table(report).find("Overall") != std::string::npos);
  CHECK(report_to_tsv(report).find("overall\t") != std::string::npos);
}
