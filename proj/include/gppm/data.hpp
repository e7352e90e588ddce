#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gppm {

struct CustomerRecord {
  std::string customer_id;
  int install_day = 1;
  int first_spend_day = 1;
  std::string channel;
  std::vector<int> spend_days;  // sorted, unique, first entry == first_spend_day
};

// A customer base observed on calendar days 1..horizon.
class SpendPanel {
 public:
  SpendPanel() = default;
  // Validates and derives the channel vocabulary (sorted, first level is the
  // dummy-coding reference).
  SpendPanel(std::vector<CustomerRecord> customers, int horizon);

  const std::vector<CustomerRecord>& customers() const { return customers_; }
  int horizon() const { return horizon_; }
  const std::vector<std::string>& channel_levels() const { return channel_levels_; }
  // Index into channel_levels for customer i; 0 is the reference level.
  int channel_index(std::size_t i) const { return channel_index_[i]; }
  std::size_t size() const { return customers_.size(); }

  // Restriction to days 1..cutoff. Customers whose first spend falls after
  // the cutoff are dropped; the rest keep their identity so that holdout
  // evaluation can line predictions up with the full panel.
  SpendPanel truncated(int cutoff) const;

 private:
  void validate() const;
  std::vector<CustomerRecord> customers_;
  int horizon_ = 0;
  std::vector<std::string> channel_levels_;
  std::vector<int> channel_index_;
};

// One eligible customer-day in the repeat-spend risk set.
struct ObservationTriple {
  int t = 0;                // calendar day
  int r = 0;                // recency: days since most recent spend
  int l = 0;                // lifetime: days since first spend
  int purchase_number = 0;  // spends made strictly before day t (>= 1)
};

struct CustomerObservations {
  std::vector<ObservationTriple> triples;
  std::vector<std::uint8_t> y;  // 1 when the customer spent on triples[k].t
};

// Risk-set derivation: each customer contributes days first_spend_day+1 ..
// horizon; recency resets to 1 the day after each spend; the first spend is
// purchase number 1 so every triple starts from purchase_number >= 1.
std::vector<CustomerObservations> derive_triples(const SpendPanel& panel);

// Spend counts per calendar day (index 0 = day 1). Repeat counts exclude
// each customer's first spend; total counts include it.
std::vector<double> daily_repeat_counts(const SpendPanel& panel);
std::vector<double> daily_total_counts(const SpendPanel& panel);

}  // namespace gppm
