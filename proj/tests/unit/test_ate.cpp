#include <set>

#include "doctest.h"

#include "bridgeaudit/ate.hpp"

using namespace bridgeaudit;
using namespace bridgeaudit::ate;

namespace {

constexpr TicketState kStates[] = {TicketState::Announced, TicketState::Approved,
                                   TicketState::Rejected, TicketState::Executed};

std::uint64_t funded_deposit(SimBridge& b, const std::string& user, std::uint64_t amount) {
  b.fund(user, amount);
  return b.deposit(user, amount, user);
}

}  // namespace

TEST_CASE("only the three lifecycle edges are legal") {
  const std::set<std::pair<TicketState, TicketState>> legal = {
      {TicketState::Announced, TicketState::Approved},
      {TicketState::Announced, TicketState::Rejected},
      {TicketState::Approved, TicketState::Executed},
  };
  for (auto from : kStates) {
    for (auto to : kStates) {
      if (legal.count({from, to})) {
        CHECK_NOTHROW(check_transition(from, to));
      } else {
        CHECK_THROWS_AS(check_transition(from, to), TransitionError);
      }
    }
  }
}

TEST_CASE("announce") {
  SimBridge b;
  const auto id = funded_deposit(b, "0xu", 1'000'000);

  SUBCASE("valid receipt") {
    const auto t = b.announce_withdraw(b.honest_receipt(id));
    CHECK(t.state == TicketState::Announced);
    CHECK(t.receipt.amount == Amount(999'000));
  }
  SUBCASE("bad tag with checks on") {
    Receipt r = b.honest_receipt(id);
    r.tag = "forged";
    const auto t = b.announce_withdraw(r);
    CHECK(t.state == TicketState::Rejected);
    CHECK(t.decided_by == "announce:signature");
  }
  SUBCASE("bad tag with checks off flows to the approver") {
    SimBridge open(SimBridge::Options{false, 1000, "k"});
    const auto id2 = funded_deposit(open, "0xu", 500);
    Receipt r = open.honest_receipt(id2);
    r.tag = "forged";
    CHECK(open.announce_withdraw(r).state == TicketState::Announced);
  }
  SUBCASE("malformed receipt") {
    Receipt r = b.honest_receipt(id);
    r.amount.reset();
    const auto t = b.announce_withdraw(r);
    CHECK(t.state == TicketState::Rejected);
    REQUIRE(t.reason);
    CHECK(t.reason->category == Category::Undecodable);
    Receipt n = b.honest_receipt(id);
    n.recipient.clear();
    CHECK(b.announce_withdraw(n).reason->category == Category::Undecodable);
  }
}

TEST_CASE("approve with the auditing approver") {
  SimBridge b(SimBridge::Options{false, 1000, "k"});
  AuditingApprover approver(b);
  const auto id = funded_deposit(b, "0xu", 1'000'000);

  SUBCASE("benign executes") {
    const auto t = b.announce_withdraw(b.honest_receipt(id));
    const auto& done = b.approve_withdraw(t.id, approver);
    CHECK(done.state == TicketState::Executed);
    CHECK(done.decided_by == "auditing");
    CHECK(b.total_minted() == Amount(999'000));
    CHECK(b.balance(SimBridge::kDest, "0xu") == Amount(999'000));
    CHECK(b.collateralized());
    CHECK_THROWS_AS(b.approve_withdraw(t.id, approver), TransitionError);
  }
  SUBCASE("double spend") {
    const Receipt r = b.honest_receipt(id);
    b.approve_withdraw(b.announce_withdraw(r).id, approver);
    const auto& again = b.approve_withdraw(b.announce_withdraw(r).id, approver);
    CHECK(again.state == TicketState::Rejected);
    REQUIRE(again.reason);
    CHECK(again.reason->category == Category::DoubleSpend);
    CHECK(b.total_minted() == Amount(999'000));
  }
  SUBCASE("over-withdraw") {
    Receipt r = b.honest_receipt(id);
    r.amount = Amount(999'001);
    const auto& t = b.approve_withdraw(b.announce_withdraw(r).id, approver);
    CHECK(t.state == TicketState::Rejected);
    CHECK(t.reason->category == Category::AmountExceedsInflow);
    CHECK(b.total_minted() == Amount(0));
  }
  SUBCASE("unbacked") {
    Receipt r{424242, Amount(5), "0xu", "x"};
    const auto& t = b.approve_withdraw(b.announce_withdraw(r).id, approver);
    CHECK(t.state == TicketState::Rejected);
    CHECK(t.reason->category == Category::UnbackedWithdrawal);
  }
}

TEST_CASE("replay protection rejects a second pending announcement") {
  SimBridge b;
  NaiveApprover naive;
  const auto id = funded_deposit(b, "0xu", 1000);
  const Receipt r = b.honest_receipt(id);
  const auto t1 = b.announce_withdraw(r);
  const auto t2 = b.announce_withdraw(r);
  CHECK(t2.state == TicketState::Announced);  // not consumed yet
  CHECK(b.approve_withdraw(t1.id, naive).state == TicketState::Executed);
  const auto& second = b.approve_withdraw(t2.id, naive);
  CHECK(second.state == TicketState::Rejected);
  CHECK(second.decided_by == "approve:replay");
  CHECK(b.announce_withdraw(r).decided_by == "announce:replay");
}

TEST_CASE("deposits need funds") {
  SimBridge b;
  CHECK_THROWS_AS(b.deposit("0xbroke", 1, "0xbroke"), std::invalid_argument);
  b.fund("0xu", 10);
  b.deposit("0xu", 4, "0xr");
  CHECK(b.balance(SimBridge::kSource, "0xu") == Amount(6));
  CHECK(b.total_locked() == Amount(4));
  CHECK(b.deposit_info(1)->first == "0xr");
  CHECK_FALSE(b.deposit_info(2));
}

TEST_CASE("the correctness experiment: 97 executed, 3 rejected") {
  const auto r = run_correctness_experiment(1);
  CHECK(r.executed == 97);
  CHECK(r.rejected == 3);
  CHECK(r.per_category == std::map<std::string, std::size_t>{
                              {"AmountExceedsInflow", 1}, {"UnbackedWithdrawal", 1}, {"DoubleSpend", 1}});
  CHECK(r.collateralized_throughout);
  CHECK(r.outcomes.size() == 100);
  CHECK(r.outcomes[0].kind == TicketKind::Benign);
  for (const auto& o : r.outcomes) {
    CHECK((o.kind == TicketKind::Benign) == (o.state == TicketState::Executed));
  }
}

TEST_CASE("outcomes do not depend on where the malicious tickets land") {
  const auto base = run_correctness_experiment(1).outcome_multiset();
  std::set<std::vector<std::size_t>> layouts;
  for (std::uint64_t seed = 2; seed <= 10; ++seed) {
    const auto r = run_correctness_experiment(seed);
    CHECK(r.outcome_multiset() == base);
    std::vector<std::size_t> where;
    for (const auto& o : r.outcomes) {
      if (o.kind != TicketKind::Benign) where.push_back(o.position);
    }
    layouts.insert(where);
  }
  CHECK(layouts.size() > 1);
}

TEST_CASE("all-benign run executes everything") {
  ExperimentOptions opts;
  opts.malicious.clear();
  const auto r = run_correctness_experiment(3, opts);
  CHECK(r.executed == 100);
  CHECK(r.rejected == 0);
}

TEST_CASE("experiments are reproducible") {
  CHECK(to_json(run_correctness_experiment(5)) == to_json(run_correctness_experiment(5)));
  ExperimentOptions bad;
  bad.total = 3;
  CHECK_THROWS_AS(run_correctness_experiment(1, bad), std::invalid_argument);
}

TEST_CASE("a naive approver behaves exactly like the unmodified bridge") {
  // Same receipts through announce+approve(naive) and withdraw_direct.
  for (bool checks : {true, false}) {
    SimBridge ate(SimBridge::Options{checks, 1000, "k"});
    SimBridge direct(SimBridge::Options{checks, 1000, "k"});
    NaiveApprover naive;
    std::vector<Receipt> receipts;
    for (std::uint64_t i = 0; i < 20; ++i) {
      const std::string u = "0xu" + std::to_string(i);
      funded_deposit(ate, u, 1000 + i);
      funded_deposit(direct, u, 1000 + i);
      receipts.push_back(ate.honest_receipt(i + 1));
    }
    receipts.push_back(receipts[3]);                           // replay
    receipts.push_back(Receipt{77, Amount(5), "0xz", "bad"});  // forged, unbacked
    Receipt over = receipts[5];
    over.amount = Amount(1'000'000);
    receipts.push_back(over);
    Receipt empty = receipts[6];
    empty.recipient.clear();
    receipts.push_back(empty);

    for (const auto& r : receipts) {
      auto t = ate.announce_withdraw(r);
      bool moved = false;
      if (t.state == TicketState::Announced) {
        moved = ate.approve_withdraw(t.id, naive).state == TicketState::Executed;
      }
      CHECK(moved == direct.withdraw_direct(r));
    }
    CHECK(ate.total_minted() == direct.total_minted());
  }
}

TEST_CASE("with checks on and a naive approver, forged receipts still stop at announce") {
  ExperimentOptions opts;
  opts.checks_enabled = true;
  opts.naive_approver = true;
  const auto r = run_correctness_experiment(4, opts);
  CHECK(r.executed == 97);
  CHECK(r.rejected == 3);
}

TEST_CASE("without checks a naive approver lets every attack through") {
  ExperimentOptions opts;
  opts.naive_approver = true;
  const auto r = run_correctness_experiment(4, opts);
  CHECK(r.executed == 100);
}
