// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/jsonl.hpp"

#include <istream>
#include <ostream>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "drpo/error.hpp"

namespace drpo {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

class LineError {
 public:
  explicit LineError(std::size_t line) : line_(line) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(fmt::format("line {}: {}", line_, what));
  }

  void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where = "") const {
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& item : obj.items()) {
      if (!ok.count(item.key())) fail(fmt::format("unknown field '{}{}'", where, item.key()));
    }
  }

  const json& field(const json& obj, const char* key) const {
    const auto it = obj.find(key);
    if (it == obj.end()) fail(fmt::format("missing required field '{}'", key));
    return *it;
  }

  std::string string(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_string()) fail(fmt::format("field '{}' must be a string", key));
    return v.get<std::string>();
  }

  double number(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_number()) fail(fmt::format("field '{}' must be a number", key));
    return v.get<double>();
  }

  std::vector<double> numbers(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_array()) fail(fmt::format("field '{}' must be an array of numbers", key));
    std::vector<double> out;
    out.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) fail(fmt::format("field '{}' must be an array of numbers", key));
      out.push_back(x.get<double>());
    }
    return out;
  }

  LabelSet labels(const json& obj, const char* key) const {
    const json& v = field(obj, key);
    if (!v.is_array()) fail(fmt::format("field '{}' must be an array of strings", key));
    LabelSet out;
    for (const auto& x : v) {
      if (!x.is_string()) fail(fmt::format("field '{}' must be an array of strings", key));
      out.insert(x.get<std::string>());
    }
    return out;
  }

  Box box(const json& obj) const {
    if (!obj.is_object()) fail("box must be an object");
    Box b{number(obj, "x"), number(obj, "y"), number(obj, "w"), number(obj, "h")};
    if (b.w < 0.0 || b.h < 0.0) fail("box width and height must be >= 0");
    return b;
  }

 private:
  std::size_t line_;
};

/// Calls fn(parsed object, line checker) for every nonblank line.
template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const LineError err(number);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      err.fail(fmt::format("malformed JSON ({})", e.what()));
    }
    if (!obj.is_object()) err.fail("record must be a JSON object");
    try {
      fn(obj, err);
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      if (what.rfind("line ", 0) == 0) throw;
      err.fail(what);
    }
  }
}

}  // namespace

std::vector<Rollout> read_rollouts(std::istream& in) {
  std::vector<Rollout> out;
  for_each_record(in, [&](const json& obj, const LineError& err) {
    err.only_keys(obj, {"question_id", "domain", "rollout_id", "reward", "reward_breakdown", "logp_current",
                        "logp_old", "logp_ref", "is_greedy"});
    Rollout r;
    r.question_id = err.string(obj, "question_id");
    r.domain = err.string(obj, "domain");
    r.rollout_id = err.string(obj, "rollout_id");
    r.reward = err.number(obj, "reward");
    if (const auto it = obj.find("reward_breakdown"); it != obj.end()) {
      if (!it->is_object()) err.fail("field 'reward_breakdown' must be an object");
      err.only_keys(*it, {"acc", "iou", "aux"}, "reward_breakdown.");
      r.breakdown = RewardBreakdown{err.number(*it, "acc"), err.number(*it, "iou"), err.number(*it, "aux")};
    }
    r.tokens.logp_current = err.numbers(obj, "logp_current");
    r.tokens.logp_old = err.numbers(obj, "logp_old");
    r.tokens.logp_ref = err.numbers(obj, "logp_ref");
    r.tokens.validate();
    if (const auto it = obj.find("is_greedy"); it != obj.end()) {
      if (!it->is_boolean()) err.fail("field 'is_greedy' must be a boolean");
      r.is_greedy = it->get<bool>();
    }
    out.push_back(std::move(r));
  });
  return out;
}

void write_rollouts(std::ostream& out, const std::vector<Rollout>& rollouts) {
  for (const auto& r : rollouts) {
    ordered_json obj;
    obj["question_id"] = r.question_id;
    obj["domain"] = r.domain;
    obj["rollout_id"] = r.rollout_id;
    obj["reward"] = r.reward;
    if (r.breakdown) {
      obj["reward_breakdown"] = {{"acc", r.breakdown->acc}, {"iou", r.breakdown->iou}, {"aux", r.breakdown->aux}};
    }
    obj["logp_current"] = r.tokens.logp_current;
    obj["logp_old"] = r.tokens.logp_old;
    obj["logp_ref"] = r.tokens.logp_ref;
    if (r.is_greedy) obj["is_greedy"] = true;
    out << obj.dump() << '\n';
  }
}

std::vector<Rollout> flatten(const IterationBatch& batch) {
  std::vector<Rollout> out;
  for (const auto& [_, d] : batch.domains)
    for (const auto& g : d.groups) out.insert(out.end(), g.rollouts.begin(), g.rollouts.end());
  return out;
}

void write_advantages(std::ostream& out, const std::vector<Rollout>& rollouts, const AdvantageTensor& advantages) {
  for (const auto& r : rollouts) {
    const AdvantageEntry* e = advantages.find(r.rollout_id);
    if (e == nullptr) throw RuntimeError(fmt::format("no advantage computed for rollout '{}'", r.rollout_id));
    const auto& d = e->diagnostics;
    ordered_json obj;
    obj["rollout_id"] = r.rollout_id;
    obj["advantage"] = e->advantage;
    obj["diagnostics"] = {{"group_mean", d.group_mean}, {"group_std", d.group_std}, {"T_domain", d.t_domain},
                          {"T_cluster", d.t_cluster},   {"m", d.m},                 {"batch_std", d.batch_std}};
    out << obj.dump() << '\n';
  }
}

std::vector<PredictionRecord> read_predictions(std::istream& in) {
  std::vector<PredictionRecord> out;
  for_each_record(in, [&](const json& obj, const LineError& err) {
    err.only_keys(obj, {"id", "domain", "dataset", "labels", "boxes"});
    PredictionRecord rec;
    rec.id = err.string(obj, "id");
    rec.prediction.labels = err.labels(obj, "labels");
    if (const auto it = obj.find("boxes"); it != obj.end()) {
      if (!it->is_array()) err.fail("field 'boxes' must be an array");
      for (const auto& b : *it) {
        if (!b.is_object()) err.fail("box must be an object");
        err.only_keys(b, {"label", "x", "y", "w", "h"}, "boxes[].");
        LabelSet key;
        key.insert(err.string(b, "label"));
        rec.prediction.boxes[*key.begin()].push_back(err.box(b));
      }
    }
    out.push_back(std::move(rec));
  });
  return out;
}

std::vector<GoldRecord> read_gold(std::istream& in) {
  std::vector<GoldRecord> out;
  for_each_record(in, [&](const json& obj, const LineError& err) {
    err.only_keys(obj, {"id", "domain", "dataset", "labels", "mask"});
    GoldRecord rec;
    rec.id = err.string(obj, "id");
    rec.domain = err.string(obj, "domain");
    rec.dataset = obj.contains("dataset") ? err.string(obj, "dataset") : rec.domain;
    rec.labels = err.labels(obj, "labels");
    if (const auto it = obj.find("mask"); it != obj.end()) {
      const json& m = *it;
      if (!m.is_object()) err.fail("field 'mask' must be an object");
      err.only_keys(m, {"height", "width", "rows", "boxes"}, "mask.");
      const json& h = err.field(m, "height");
      const json& w = err.field(m, "width");
      if (!h.is_number_integer() || !w.is_number_integer()) err.fail("mask height and width must be integers");
      Mask mask(h.get<int>(), w.get<int>());
      if (const auto rows = m.find("rows"); rows != m.end()) {
        if (!rows->is_array() || rows->size() != static_cast<std::size_t>(mask.height())) {
          err.fail(fmt::format("mask.rows must be an array of {} strings", mask.height()));
        }
        for (int r = 0; r < mask.height(); ++r) {
          const json& row = (*rows)[static_cast<std::size_t>(r)];
          if (!row.is_string() || row.get<std::string>().size() != static_cast<std::size_t>(mask.width())) {
            err.fail(fmt::format("mask.rows[{}] must be a string of {} '0'/'1' characters", r, mask.width()));
          }
          const auto s = row.get<std::string>();
          for (int c = 0; c < mask.width(); ++c) {
            const char ch = s[static_cast<std::size_t>(c)];
            if (ch != '0' && ch != '1') err.fail(fmt::format("mask.rows[{}] contains '{}'", r, ch));
            mask.set(r, c, ch == '1');
          }
        }
      }
      if (const auto boxes = m.find("boxes"); boxes != m.end()) {
        if (!boxes->is_array()) err.fail("mask.boxes must be an array");
        for (const auto& b : *boxes) mask.fill_box(err.box(b));
      }
      rec.mask = std::move(mask);
    }
    out.push_back(std::move(rec));
  });
  return out;
}

}  // namespace drpo
