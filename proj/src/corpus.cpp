#include "memgate/corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "memgate/rng.hpp"

namespace memgate {

using json = nlohmann::json;

void WorkloadConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("zipf alpha must be > 0");
  if (num_requests == 0) throw std::invalid_argument("num_requests must be >= 1");
}

QueryRecord parse_query_record(const std::string& line) {
  json j = json::parse(line);  // throws json::parse_error
  if (!j.is_object()) throw CorpusError("record is not a JSON object");
  QueryRecord r;
  r.qid = j.at("qid").get<std::string>();
  r.question = j.at("question").get<std::string>();
  r.options = j.at("options").get<std::vector<std::string>>();
  r.category = j.value("category", std::string{});
  const auto label = j.at("gold_label").get<std::string>();
  if (r.qid.empty()) throw CorpusError("empty qid");
  if (r.options.empty() || r.options.size() > kMaxOptions)
    throw CorpusError("options must hold 1.." + std::to_string(kMaxOptions) + " entries");
  if (label.size() != 1 || label[0] < 'A' ||
      static_cast<std::size_t>(label[0] - 'A') >= r.options.size())
    throw CorpusError("gold_label '" + label + "' does not name an option");
  r.gold_label = label[0];
  return r;
}

std::string serialize_query_record(const QueryRecord& r) {
  nlohmann::ordered_json j;
  j["qid"] = r.qid;
  j["question"] = r.question;
  j["options"] = r.options;
  j["gold_label"] = std::string(1, r.gold_label);
  j["category"] = r.category;
  return j.dump();
}

std::vector<QueryRecord> load_corpus(const std::filesystem::path& path,
                                     std::optional<std::size_t> limit) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path.string());

  std::vector<QueryRecord> records;
  std::unordered_map<std::string, std::size_t> seen;  // qid -> line
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (limit && records.size() >= *limit) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    QueryRecord r;
    try {
      r = parse_query_record(line);
    } catch (const std::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(lineno) +
                        ": malformed record: " + e.what());
    }
    auto [it, fresh] = seen.emplace(r.qid, lineno);
    if (!fresh)
      throw CorpusError(path.string() + ": duplicate qid '" + r.qid + "' on lines " +
                        std::to_string(it->second) + " and " + std::to_string(lineno));
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<double> zipf_probabilities(std::size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("zipf_probabilities: n must be >= 1");
  if (!(alpha > 0.0)) throw std::invalid_argument("zipf_probabilities: alpha must be > 0");
  std::vector<double> p(n);
  for (std::size_t k = 0; k < n; ++k) p[k] = std::pow(static_cast<double>(k + 1), -alpha);
  // Sum smallest-first to limit rounding error in the normalizer.
  double total = 0.0;
  for (std::size_t k = n; k-- > 0;) total += p[k];
  for (auto& v : p) v /= total;
  return p;
}

std::vector<std::size_t> rank_assignment(std::size_t corpus_size, std::uint64_t seed) {
  std::vector<std::size_t> order(corpus_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = SplitMix64::substream(seed, "shuffle");
  for (std::size_t i = corpus_size; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  return order;
}

std::vector<QueryEvent> sample_stream(const std::vector<QueryRecord>& corpus,
                                      const WorkloadConfig& config) {
  config.validate();
  if (corpus.empty()) throw std::invalid_argument("sample_stream: empty corpus");
  std::size_t n = corpus.size();
  if (config.corpus_size_limit) n = std::min(n, *config.corpus_size_limit);
  if (n == 0) throw std::invalid_argument("sample_stream: corpus_size_limit is 0");

  const auto probs = zipf_probabilities(n, config.alpha);
  std::vector<double> cdf(n);
  std::partial_sum(probs.begin(), probs.end(), cdf.begin());
  const auto ranks = rank_assignment(n, config.seed);

  auto rng = SplitMix64::substream(config.seed, "draws");
  std::vector<QueryEvent> events;
  events.reserve(config.num_requests);
  for (std::size_t t = 1; t <= config.num_requests; ++t) {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t rank = std::min<std::size_t>(it - cdf.begin(), n - 1);
    events.push_back({t, ranks[rank]});
  }
  return events;
}

namespace {

constexpr std::array kFirms = {
    "Aldgate Textiles", "Brightwater Foods", "Corvane Logistics", "Dunmore Robotics",
    "Elmstead Pharmacy", "Fairhaven Motors", "Glenrock Mining", "Halcyon Apparel",
    "Ironbridge Steel", "Juniper Software", "Kestrel Airlines", "Larkspur Bakery",
    "Marlow Shipping", "Northgate Insurance", "Oakridge Furniture", "Pinecrest Hotels",
    "Quayside Brewing", "Redfern Energy", "Silverton Dairy", "Thornbury Media"};

constexpr std::array kProducts = {
    "solar panels", "office chairs", "frozen dumplings", "bicycle helmets",
    "printer cartridges", "garden hoses", "wool blankets", "smart thermostats",
    "ceramic tiles", "running shoes", "espresso machines", "leather wallets"};

constexpr std::array kCities = {
    "Leeds", "Osaka", "Denver", "Lyon", "Porto", "Tampere", "Austin", "Hobart",
    "Calgary", "Gdansk", "Nairobi", "Cusco", "Bergen", "Tucson", "Malaga", "Perth"};

constexpr std::array kMonths = {"January", "February", "March", "April", "May", "June",
                                "July", "August", "September", "October", "November", "December"};

constexpr std::array kCategories = {"business", "accounting", "finance", "marketing",
                                    "management", "economics"};

std::string money(std::uint64_t v) { return "$" + std::to_string(v); }

std::string pct(std::uint64_t basis) {
  return std::to_string(basis / 10) + "." + std::to_string(basis % 10) + "%";
}

}  // namespace

std::vector<QueryRecord> synthetic_corpus(std::size_t n, std::uint64_t seed) {
  auto rng = SplitMix64::substream(seed, "synthetic-corpus");
  auto pick = [&](const auto& arr) { return std::string(arr[rng.below(arr.size())]); };
  auto between = [&](std::uint64_t lo, std::uint64_t hi) { return lo + rng.below(hi - lo + 1); };

  std::vector<QueryRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    QueryRecord r;
    r.qid = "syn-" + std::to_string(i + 1);
    r.category = pick(kCategories);
    const std::string firm = pick(kFirms);
    const std::string product = pick(kProducts);
    const std::string city = pick(kCities);
    const std::string month = pick(kMonths);
    const std::uint64_t a = between(120, 980) * 1000;
    const std::uint64_t b = between(15, 95) * 100;
    const std::uint64_t c = between(11, 389);
    const std::uint64_t d = between(2, 19);
    const std::uint64_t year = between(1994, 2031);
    const std::string where = " in " + city + " during " + month + " " + std::to_string(year);

    switch (i % 8) {
      case 0:
        r.question = firm + " sold " + product + where + " for total revenue of " + money(a) +
                     " while cost of goods sold was " + money(a - b * d / 10) + ". What was its gross margin?";
        break;
      case 1:
        r.question = firm + " borrows " + money(a) + " at an annual rate of " + pct(c) +
                     " compounded monthly to expand its " + product + " line" + where +
                     ". How much interest accrues after " + std::to_string(d) + " years?";
        break;
      case 2:
        r.question = "A marketing manager at " + firm + " estimates that raising the price of " + product +
                     " by " + pct(c) + where + " would cut unit demand from " + std::to_string(a / 100) + " to " +
                     std::to_string(a / 100 - b / 10) + ". Which elasticity classification fits?";
        break;
      case 3:
        r.question = "Under straight-line depreciation, " + product + " equipment purchased by " + firm + where +
                     " for " + money(a) + " has salvage value " + money(b * 10) + " and a useful life of " +
                     std::to_string(d) + " years. What is the annual expense?";
        break;
      case 4:
        r.question = "Which statement best describes the legal duty of a director of " + firm +
                     " who learns" + where + " of a private offer for " + product + " assets worth " + money(a) +
                     " at a premium of " + pct(c) + "?";
        break;
      case 5:
        r.question = firm + " holds inventory of " + std::to_string(c * 7) + " units of " + product + where +
                     ", with annual demand " + std::to_string(a / 50) + " and ordering cost " + money(b / 10) +
                     ". Compute the economic order quantity if holding cost is " + money(d + 2) + ".";
        break;
      case 6:
        r.question = "An investor" + where + " pays " + money(b * 3) + " for a bond issued by " + firm +
                     " (" + product + ") with coupon " + pct(c % 120 + 10) + " and face value " + money(a / 10) +
                     ", maturing in " + std::to_string(d) + " years. What is the current yield?";
        break;
      default:
        r.question = "The payroll of " + firm + where + " reached " + money(a) + " across " + std::to_string(c) +
                     " staff producing " + product + ". Which motivation theory links a " + pct(d * 10) +
                     " bonus to productivity?";
        break;
    }

    const std::size_t option_count = 4 + rng.below(kMaxOptions - 3);  // 4..10
    for (std::size_t k = 0; k < option_count; ++k) {
      r.options.push_back("choice " + std::to_string(k + 1) + ": " +
                          std::to_string(between(1, 999)) + " " + product);
    }
    r.gold_label = static_cast<char>('A' + rng.below(option_count));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace memgate
