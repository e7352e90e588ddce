#include "gppm/io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gppm/errors.hpp"
#include "json.hpp"

namespace gppm {

static_assert(std::endian::native == std::endian::little,
              "draws files are written in the host byte order and the format "
              "is pinned little-endian");

namespace {

using nlohmann::json;

std::string where(const std::string& path, int line) {
  return path + ":" + std::to_string(line) + ": ";
}

// Plain comma-separated fields, no quoting: ids and channel labels are
// simple tokens in this format.
std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

int parse_int(const std::string& field, const std::string& path, int line,
              const char* column) {
  std::size_t used = 0;
  int value = 0;
  try {
    value = std::stoi(field, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != field.size())
    throw ValidationError(where(path, line) + std::string(column) +
                          " must be an integer, got '" + field + "'");
  return value;
}

void expect_header(const std::vector<std::string>& lines, const std::string& path,
                   const char* expected) {
  if (lines.empty())
    throw ValidationError(path + ": empty file, expected header '" + expected + "'");
  if (lines[0] != expected)
    throw ValidationError(where(path, 1) + "expected header '" + expected + "', got '" +
                          lines[0] + "'");
}

}  // namespace

SpendPanel load_panel(const std::string& events_path, const std::string& customers_path,
                      int horizon, int* duplicate_events) {
  const auto customer_lines = read_lines(customers_path);
  expect_header(customer_lines, customers_path,
                "customer_id,install_day,first_spend_day,channel");

  struct Row {
    CustomerRecord rec;
    int line = 0;
    std::set<int> days;
  };
  std::vector<Row> rows;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 1; i < customer_lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    if (customer_lines[i].empty()) continue;
    const auto f = split_fields(customer_lines[i]);
    if (f.size() != 4)
      throw ValidationError(where(customers_path, line) + "expected 4 fields, got " +
                            std::to_string(f.size()));
    if (f[0].empty()) throw ValidationError(where(customers_path, line) + "empty customer_id");
    if (index.count(f[0]))
      throw ValidationError(where(customers_path, line) + "duplicate customer_id '" + f[0] +
                            "'");
    Row r;
    r.rec.customer_id = f[0];
    r.rec.install_day = parse_int(f[1], customers_path, line, "install_day");
    r.rec.first_spend_day = parse_int(f[2], customers_path, line, "first_spend_day");
    r.rec.channel = f[3];
    r.line = line;
    index[f[0]] = rows.size();
    rows.push_back(std::move(r));
  }

  const auto event_lines = read_lines(events_path);
  expect_header(event_lines, events_path, "customer_id,day,spend");

  int duplicates = 0;
  int max_day = 0;
  bool any_spend = false;
  for (std::size_t i = 1; i < event_lines.size(); ++i) {
    const int line = static_cast<int>(i) + 1;
    if (event_lines[i].empty()) continue;
    const auto f = split_fields(event_lines[i]);
    if (f.size() != 3)
      throw ValidationError(where(events_path, line) + "expected 3 fields, got " +
                            std::to_string(f.size()));
    const auto it = index.find(f[0]);
    if (it == index.end())
      throw ValidationError(where(events_path, line) + "unknown customer_id '" + f[0] + "'");
    const int day = parse_int(f[1], events_path, line, "day");
    if (day < 1)
      throw ValidationError(where(events_path, line) + "day must be >= 1, got " +
                            std::to_string(day));
    const int spend = parse_int(f[2], events_path, line, "spend");
    if (spend != 0 && spend != 1)
      throw ValidationError(where(events_path, line) + "spend must be 0 or 1, got " +
                            std::to_string(spend));
    max_day = std::max(max_day, day);
    if (spend == 0) continue;
    any_spend = true;
    if (!rows[it->second].days.insert(day).second) ++duplicates;
  }
  if (!any_spend) throw ValidationError(events_path + ": no spend events");
  if (duplicate_events) *duplicate_events = duplicates;

  std::vector<CustomerRecord> customers;
  customers.reserve(rows.size());
  for (auto& r : rows) {
    if (!r.days.count(r.rec.first_spend_day))
      throw ValidationError(where(customers_path, r.line) + "first_spend_day " +
                            std::to_string(r.rec.first_spend_day) +
                            " has no matching spend event for customer '" +
                            r.rec.customer_id + "'");
    r.rec.spend_days.assign(r.days.begin(), r.days.end());
    customers.push_back(std::move(r.rec));
  }
  return SpendPanel(std::move(customers), horizon > 0 ? horizon : max_day);
}

void save_panel(const SpendPanel& panel, const std::string& events_path,
                const std::string& customers_path) {
  std::ofstream customers(customers_path);
  if (!customers) throw ValidationError("cannot open " + customers_path + " for writing");
  customers << "customer_id,install_day,first_spend_day,channel\n";
  for (const auto& c : panel.customers())
    customers << c.customer_id << ',' << c.install_day << ',' << c.first_spend_day << ','
              << c.channel << '\n';
  if (!customers.flush()) throw ValidationError("write failed: " + customers_path);

  std::ofstream events(events_path);
  if (!events) throw ValidationError("cannot open " + events_path + " for writing");
  events << "customer_id,day,spend\n";
  for (const auto& c : panel.customers())
    for (int day : c.spend_days) events << c.customer_id << ',' << day << ",1\n";
  if (!events.flush()) throw ValidationError("write failed: " + events_path);
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

constexpr char kDrawsMagic[8] = {'G', 'P', 'P', 'M', 'D', 'R', 'W', 'S'};
constexpr std::uint32_t kDrawsVersion = 1;

template <typename T>
void put(std::string& buf, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  buf.append(raw, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& at) {
  T value;
  std::memcpy(&value, buf.data() + at, sizeof(T));
  at += sizeof(T);
  return value;
}

json spec_to_json(const ModelSpec& s) {
  return json{{"long_run", s.long_run},
              {"short_run", s.short_run},
              {"cyclic", s.cyclic},
              {"recency", s.recency},
              {"lifetime", s.lifetime},
              {"purchase_number", s.purchase_number},
              {"channel", s.channel},
              {"heterogeneity", s.heterogeneity},
              {"day_effects", s.day_effects},
              {"purchase_number_cap", s.purchase_number_cap},
              {"cyclic_period", s.cyclic_period}};
}

ModelSpec spec_from_json(const json& j) {
  ModelSpec s;
  s.long_run = j.at("long_run").get<bool>();
  s.short_run = j.at("short_run").get<bool>();
  s.cyclic = j.at("cyclic").get<bool>();
  s.recency = j.at("recency").get<bool>();
  s.lifetime = j.at("lifetime").get<bool>();
  s.purchase_number = j.at("purchase_number").get<bool>();
  s.channel = j.at("channel").get<bool>();
  s.heterogeneity = j.at("heterogeneity").get<bool>();
  s.day_effects = j.at("day_effects").get<bool>();
  s.purchase_number_cap = j.at("purchase_number_cap").get<int>();
  s.cyclic_period = j.at("cyclic_period").get<double>();
  return s;
}

json dims_to_json(const ModelDims& d) {
  return json{{"horizon", d.horizon},
              {"n_recency", d.n_recency},
              {"n_lifetime", d.n_lifetime},
              {"n_customers", d.n_customers},
              {"channel_levels", d.channel_levels},
              {"first_spend_days", d.first_spend_days},
              {"install_days", d.install_days}};
}

ModelDims dims_from_json(const json& j) {
  ModelDims d;
  d.horizon = j.at("horizon").get<int>();
  d.n_recency = j.at("n_recency").get<int>();
  d.n_lifetime = j.at("n_lifetime").get<int>();
  d.n_customers = j.at("n_customers").get<int>();
  d.channel_levels = j.at("channel_levels").get<std::vector<std::string>>();
  d.first_spend_days = j.at("first_spend_days").get<std::vector<int>>();
  d.install_days = j.at("install_days").get<std::vector<int>>();
  return d;
}

}  // namespace

void save_draws(const PosteriorDraws& draws, const DrawsMeta& meta, const std::string& path) {
  if (draws.chains.empty()) throw ValidationError("save_draws: no chains");
  const int dim = draws.dim();
  const int iters = draws.draws_per_chain();
  if (static_cast<int>(draws.names.size()) != dim)
    throw ValidationError("save_draws: names do not match the draw dimension");
  for (const auto& c : draws.chains)
    if (c.rows() != iters || c.cols() != dim)
      throw ValidationError("save_draws: chains differ in shape");

  json header;
  header["format"] = "gppm-draws";
  header["transforms"] = "whitened-log-v1";
  header["names"] = draws.names;
  header["seed"] = draws.seed;
  header["chains"] = static_cast<int>(draws.chains.size());
  header["iterations"] = iters;
  header["dim"] = dim;
  header["model"] = json{{"spec", spec_to_json(meta.spec)},
                         {"dims", dims_to_json(meta.dims)},
                         {"seed", meta.seed}};
  json stats = json::array();
  for (const auto& s : draws.stats) {
    std::vector<double> inv_mass(s.inv_mass.data(), s.inv_mass.data() + s.inv_mass.size());
    stats.push_back(json{{"accept_rate", s.accept_rate},
                         {"divergences", s.divergences},
                         {"step_size", s.step_size},
                         {"inv_mass", inv_mass}});
  }
  header["stats"] = stats;
  const std::string header_text = header.dump();

  std::string buf;
  buf.append(kDrawsMagic, sizeof(kDrawsMagic));
  put(buf, kDrawsVersion);
  put(buf, static_cast<std::uint64_t>(header_text.size()));
  buf.append(header_text);
  for (const auto& c : draws.chains)
    for (int i = 0; i < iters; ++i)
      for (int j = 0; j < dim; ++j) put(buf, c(i, j));
  put(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out.flush()) throw ValidationError("write failed: " + path);
}

LoadedDraws load_draws(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream raw;
  raw << in.rdbuf();
  const std::string buf = raw.str();

  constexpr std::size_t kMinSize = sizeof(kDrawsMagic) + sizeof(std::uint32_t) +
                                   2 * sizeof(std::uint64_t);
  if (buf.size() < kMinSize)
    throw ValidationError(path + ": file too short to be a draws file");
  if (std::memcmp(buf.data(), kDrawsMagic, sizeof(kDrawsMagic)) != 0)
    throw ValidationError(path + ": not a draws file (bad magic)");

  std::size_t at = sizeof(kDrawsMagic);
  const auto version = take<std::uint32_t>(buf, at);
  if (version != kDrawsVersion)
    throw ValidationError(path + ": unsupported draws file version " +
                          std::to_string(version) + " (expected " +
                          std::to_string(kDrawsVersion) + ")");

  const std::uint64_t stored = [&] {
    std::size_t tail = buf.size() - sizeof(std::uint64_t);
    return take<std::uint64_t>(buf, tail);
  }();
  if (fnv1a64(buf.data(), buf.size() - sizeof(std::uint64_t)) != stored)
    throw ValidationError(path + ": checksum mismatch, file is truncated or corrupted");

  const auto header_len = take<std::uint64_t>(buf, at);
  if (at + header_len > buf.size() - sizeof(std::uint64_t))
    throw ValidationError(path + ": header length exceeds the file");
  json header;
  try {
    header = json::parse(buf.substr(at, header_len));
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad draws header: " + e.what());
  }
  at += header_len;

  LoadedDraws out;
  try {
    if (header.at("format").get<std::string>() != "gppm-draws")
      throw ValidationError(path + ": not a draws header");
    const int n_chains = header.at("chains").get<int>();
    const int iters = header.at("iterations").get<int>();
    const int dim = header.at("dim").get<int>();
    if (n_chains < 1 || iters < 0 || dim < 1)
      throw ValidationError(path + ": bad chain layout in header");
    out.draws.names = header.at("names").get<std::vector<std::string>>();
    if (static_cast<int>(out.draws.names.size()) != dim)
      throw ValidationError(path + ": header names do not match the dimension");
    {
      std::set<std::string> uniq(out.draws.names.begin(), out.draws.names.end());
      if (uniq.size() != out.draws.names.size())
        throw ValidationError(path + ": header repeats a parameter name");
    }
    out.draws.seed = header.at("seed").get<std::uint64_t>();
    const json& model = header.at("model");
    out.meta.spec = spec_from_json(model.at("spec"));
    out.meta.dims = dims_from_json(model.at("dims"));
    out.meta.seed = model.at("seed").get<std::uint64_t>();
    for (const json& s : header.at("stats")) {
      ChainStats cs;
      cs.accept_rate = s.at("accept_rate").get<double>();
      cs.divergences = s.at("divergences").get<int>();
      cs.step_size = s.at("step_size").get<double>();
      const auto im = s.at("inv_mass").get<std::vector<double>>();
      cs.inv_mass = Eigen::Map<const Eigen::VectorXd>(im.data(),
                                                      static_cast<Eigen::Index>(im.size()));
      out.draws.stats.push_back(std::move(cs));
    }

    const std::size_t need = static_cast<std::size_t>(n_chains) * iters * dim * sizeof(double);
    if (buf.size() - sizeof(std::uint64_t) - at != need)
      throw ValidationError(path + ": payload size does not match the header layout");
    out.draws.chains.reserve(static_cast<std::size_t>(n_chains));
    for (int c = 0; c < n_chains; ++c) {
      Eigen::MatrixXd m(iters, dim);
      for (int i = 0; i < iters; ++i)
        for (int j = 0; j < dim; ++j) m(i, j) = take<double>(buf, at);
      out.draws.chains.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ValidationError(path + ": bad draws header: " + e.what());
  }
  return out;
}

}  // namespace gppm
