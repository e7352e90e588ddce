#include "gppm/data.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "gppm/errors.hpp"

namespace gppm {

SpendPanel::SpendPanel(std::vector<CustomerRecord> customers, int horizon)
    : customers_(std::move(customers)), horizon_(horizon) {
  validate();
  std::set<std::string> levels;
  for (const auto& c : customers_) levels.insert(c.channel);
  channel_levels_.assign(levels.begin(), levels.end());
  channel_index_.reserve(customers_.size());
  for (const auto& c : customers_) {
    const auto it = std::lower_bound(channel_levels_.begin(), channel_levels_.end(), c.channel);
    channel_index_.push_back(static_cast<int>(it - channel_levels_.begin()));
  }
}

void SpendPanel::validate() const {
  if (horizon_ < 1) throw ValidationError("panel: horizon must be >= 1");
  std::unordered_set<std::string> seen;
  for (const auto& c : customers_) {
    if (c.customer_id.empty()) throw ValidationError("panel: empty customer_id");
    if (!seen.insert(c.customer_id).second)
      throw ValidationError("panel: duplicate customer_id '" + c.customer_id + "'");
    if (c.channel.empty())
      throw ValidationError("panel: customer '" + c.customer_id + "' has empty channel");
    if (c.install_day < 1 || c.install_day > c.first_spend_day)
      throw ValidationError("panel: customer '" + c.customer_id +
                            "' needs 1 <= install_day <= first_spend_day");
    if (c.first_spend_day > horizon_)
      throw ValidationError("panel: customer '" + c.customer_id +
                            "' first_spend_day exceeds horizon");
    if (c.spend_days.empty())
      throw ValidationError("panel: customer '" + c.customer_id + "' has no spend days");
    if (c.spend_days.front() != c.first_spend_day)
      throw ValidationError("panel: customer '" + c.customer_id +
                            "' first spend day disagrees with spend_days");
    for (std::size_t k = 0; k < c.spend_days.size(); ++k) {
      if (c.spend_days[k] < 1 || c.spend_days[k] > horizon_)
        throw ValidationError("panel: customer '" + c.customer_id + "' spend day out of range");
      if (k > 0 && c.spend_days[k] <= c.spend_days[k - 1])
        throw ValidationError("panel: customer '" + c.customer_id +
                              "' spend days must be strictly increasing");
    }
  }
}

SpendPanel SpendPanel::truncated(int cutoff) const {
  if (cutoff < 1 || cutoff > horizon_)
    throw ValidationError("panel: truncation cutoff outside 1..horizon");
  std::vector<CustomerRecord> kept;
  for (const auto& c : customers_) {
    if (c.first_spend_day > cutoff) continue;
    CustomerRecord r = c;
    r.spend_days.erase(std::upper_bound(r.spend_days.begin(), r.spend_days.end(), cutoff),
                       r.spend_days.end());
    kept.push_back(std::move(r));
  }
  return SpendPanel(std::move(kept), cutoff);
}

std::vector<CustomerObservations> derive_triples(const SpendPanel& panel) {
  std::vector<CustomerObservations> out;
  out.reserve(panel.size());
  for (const auto& c : panel.customers()) {
    CustomerObservations obs;
    const int first = c.first_spend_day;
    const int T = panel.horizon();
    if (first < T) {
      obs.triples.reserve(static_cast<std::size_t>(T - first));
      obs.y.reserve(static_cast<std::size_t>(T - first));
      std::size_t next_spend = 1;  // index into spend_days past the first spend
      int last_spend = first;
      int purchases = 1;
      for (int t = first + 1; t <= T; ++t) {
        ObservationTriple tr;
        tr.t = t;
        tr.r = t - last_spend;
        tr.l = t - first;
        tr.purchase_number = purchases;
        const bool spent =
            next_spend < c.spend_days.size() && c.spend_days[next_spend] == t;
        obs.triples.push_back(tr);
        obs.y.push_back(spent ? 1 : 0);
        if (spent) {
          last_spend = t;
          ++purchases;
          ++next_spend;
        }
      }
    }
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<double> daily_repeat_counts(const SpendPanel& panel) {
  std::vector<double> counts(static_cast<std::size_t>(panel.horizon()), 0.0);
  for (const auto& c : panel.customers())
    for (std::size_t k = 1; k < c.spend_days.size(); ++k)
      counts[static_cast<std::size_t>(c.spend_days[k] - 1)] += 1.0;
  return counts;
}

std::vector<double> daily_total_counts(const SpendPanel& panel) {
  std::vector<double> counts(static_cast<std::size_t>(panel.horizon()), 0.0);
  for (const auto& c : panel.customers())
    for (int d : c.spend_days) counts[static_cast<std::size_t>(d - 1)] += 1.0;
  return counts;
}

}  // namespace gppm
