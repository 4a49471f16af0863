#pragma once

// Seeded synthetic tourism star schema: a Reservation fact table referencing
// sixteen dimension tables, plus five preset cuboid definitions.
//
// Every review table holds one review per reservation whose score is a noisy
// linear function of that reservation's price and duration. The coefficients
// and noise level are drawn from the seed and written to ground_truth.json so
// regressions can be checked against known values.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "clustcube/star_store.hpp"

namespace clustcube::tourism {

enum class Scale { kTiny, kSmall, kMedium };

inline Scale parse_scale(std::string_view s) {
  if (s == "tiny") return Scale::kTiny;
  if (s == "small") return Scale::kSmall;
  if (s == "medium") return Scale::kMedium;
  throw DomainError("unknown scale '" + std::string(s) + "' (expected tiny, small, or medium)");
}

inline std::string_view to_string(Scale s) {
  switch (s) {
    case Scale::kTiny: return "tiny";
    case Scale::kSmall: return "small";
    case Scale::kMedium: return "medium";
  }
  return "?";
}

inline std::size_t fact_rows(Scale s) {
  switch (s) {
    case Scale::kTiny: return 100;
    case Scale::kSmall: return 10'000;
    case Scale::kMedium: return 100'000;
  }
  return 0;
}

struct GenConfig {
  std::uint64_t seed = 42;
  Scale scale = Scale::kTiny;
  std::filesystem::path out_dir;
};

inline constexpr double kNoiseSigma = 0.25;

inline const std::vector<std::string>& dimension_tables() {
  static const std::vector<std::string> tables = {
      "Accommodation",       "PointOfInterest", "CarRental",    "Flight",        "Ferry",
      "Taxi",                "Tour",            "Tourist",      "GeographicalArea",
      "AccommodationReview", "CarRentalReview", "FlightReview", "FerryReview",   "TourReview",
      "TaxiReview",          "PointOfInterestReview"};
  return tables;
}

inline const std::vector<std::string>& review_tables() {
  static const std::vector<std::string> tables = {"AccommodationReview", "CarRentalReview", "FlightReview",
                                                  "FerryReview",         "TourReview",      "TaxiReview",
                                                  "PointOfInterestReview"};
  return tables;
}

/// Foreign-key column in Reservation for a dimension table, e.g.
/// GeographicalArea -> geographical_area_id.
inline std::string fk_column(std::string_view table) {
  std::string out;
  for (char c : table) {
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (!out.empty()) out.push_back('_');
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      out.push_back(c);
    }
  }
  return out + "_id";
}

struct ReviewTruth {
  double intercept = 0;
  double price = 0;
  double duration_days = 0;
  double noise_sigma = kNoiseSigma;
};

struct CuboidPreset {
  std::string name;
  std::vector<std::string> dimensions;
  std::string codq;
  std::size_t default_k = 3;
  std::string target;        // object attribute holding the review score
  std::string review_table;  // source of the target, keys ground_truth.json
};

namespace detail {

struct Coord {
  std::string_view table;
  std::string_view alias;
  std::string_view column;
  std::string_view name;
};

inline std::string preset_codq(const std::vector<Coord>& coords, std::string_view target_alias,
                               std::string_view target_name) {
  std::string q = "SELECT ";
  for (const auto& c : coords) {
    q += std::string(c.alias) + "." + std::string(c.column) + " AS " + std::string(c.name) + ":coordinate,\n       ";
  }
  q += "r.price AS price:feature,\n       r.duration_days AS duration_days:feature,\n";
  q += "       r.party_size AS party_size:feature,\n       t.age AS tourist_age:feature,\n";
  q += "       " + std::string(target_alias) + ".score AS " + std::string(target_name) + ":target,\n";
  q += "       a.stars AS accommodation_stars:carry\nFROM Reservation r\n";
  for (const auto& c : coords) {
    q += "JOIN " + std::string(c.table) + " " + std::string(c.alias) + " ON r." + fk_column(c.table) + " = " +
         std::string(c.alias) + ".id\n";
  }
  return q;
}

inline CuboidPreset make_preset(std::string name, std::string_view service, std::string_view service_alias,
                                std::string_view service_column, std::string_view review) {
  std::string service_coord = fk_column(service);
  service_coord = service_coord.substr(0, service_coord.size() - 3) + "_" + std::string(service_column);
  std::string target = fk_column(review);
  target = target.substr(0, target.size() - 3) + "_score";
  std::string review_coord = fk_column(review);
  review_coord = review_coord.substr(0, review_coord.size() - 3) + "_channel";
  std::vector<Coord> coords = {
      {"Accommodation", "a", "category", "accommodation_category"},
      {service, service_alias, service_column, service_coord},
      {"GeographicalArea", "g", "city", "city"},
      {"Tourist", "t", "age_band", "age_band"},
      {review, "sr", "channel", review_coord},
      {"AccommodationReview", "ar", "channel", "accommodation_review_channel"},
  };
  CuboidPreset p;
  p.name = std::move(name);
  for (const auto& c : coords) p.dimensions.emplace_back(c.table);
  p.codq = preset_codq(coords, "sr", target);
  p.target = target;
  p.review_table = std::string(review);
  return p;
}

/// Deterministic draws on top of mt19937_64; the std distributions are not
/// portable across standard libraries, so they are not used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  std::int64_t integer(std::int64_t lo, std::int64_t hi) {
    auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }
  template <class T>
  const T& pick(const std::vector<T>& items) {
    return items[static_cast<std::size_t>(integer(0, static_cast<std::int64_t>(items.size()) - 1))];
  }
  /// Box-Muller; one normal per call.
  double normal() {
    double u1 = unit();
    double u2 = unit();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

inline double round_to(double x, double step) {
  double inv = std::round(1.0 / step);
  return std::round(x * inv) / inv;
}

struct Builder {
  StarSchema schema;
  std::map<std::string, TableData> data;

  TableData& table(const std::string& name, std::vector<ColumnDef> cols) {
    schema.tables.push_back({name, cols});
    return data[name] = TableData{name, std::move(cols), {}};
  }
};

}  // namespace detail

/// The five preset cuboids. Ferry and Tour follow the published figures; the
/// Flight, CarRental, and Taxi cubes pair their service and its review with
/// Accommodation, AccommodationReview, Tourist, and GeographicalArea.
inline std::vector<CuboidPreset> presets() {
  return {
      detail::make_preset("FlightInformationCube", "Flight", "s", "cabin_class", "FlightReview"),
      detail::make_preset("FerryInformationCube", "Ferry", "s", "vessel_type", "FerryReview"),
      detail::make_preset("CarRentalInformationCube", "CarRental", "s", "car_class", "CarRentalReview"),
      detail::make_preset("TourInformationCube", "CarRental", "s", "company", "CarRentalReview"),
      detail::make_preset("TaxiInformationCube", "Taxi", "s", "vehicle_type", "TaxiReview"),
  };
}

inline const CuboidPreset* find_preset(std::string_view name) {
  static const std::vector<CuboidPreset> all = presets();
  for (const auto& p : all) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

struct GenResult {
  StarSchema schema;
  std::map<std::string, std::size_t> row_counts;
  std::map<std::string, ReviewTruth> truth;
  std::vector<std::filesystem::path> files;
};

/// Builds the dataset in memory. Pure function of (seed, scale).
inline std::pair<GenResult, std::map<std::string, TableData>> generate_tables(std::uint64_t seed, Scale scale) {
  using CT = ColumnType;
  detail::Rng rng(seed);
  detail::Builder b;
  const std::size_t n_fact = fact_rows(scale);
  auto pick_count = [&](std::size_t tiny, std::size_t small, std::size_t medium) {
    return scale == Scale::kTiny ? tiny : scale == Scale::kSmall ? small : medium;
  };

  struct Place {
    const char* city;
    const char* region;
    const char* country;
  };
  static const std::vector<Place> places = {
      {"Cosenza", "Calabria", "Italy"},      {"Rende", "Calabria", "Italy"},
      {"Reggio Calabria", "Calabria", "Italy"}, {"Palermo", "Sicily", "Italy"},
      {"Catania", "Sicily", "Italy"},        {"Messina", "Sicily", "Italy"},
      {"Naples", "Campania", "Italy"},       {"Salerno", "Campania", "Italy"},
      {"Athens", "Attica", "Greece"},        {"Piraeus", "Attica", "Greece"},
      {"Heraklion", "Crete", "Greece"},      {"Chania", "Crete", "Greece"},
      {"Seville", "Andalusia", "Spain"},     {"Malaga", "Andalusia", "Spain"},
      {"Barcelona", "Catalonia", "Spain"},   {"Girona", "Catalonia", "Spain"},
      {"Valletta", "Malta", "Malta"},        {"Sliema", "Malta", "Malta"},
  };
  std::vector<std::string> cities;
  for (const auto& p : places) cities.emplace_back(p.city);

  auto& geo = b.table("GeographicalArea", {{"id", CT::kInteger}, {"city", CT::kText}, {"region", CT::kText}, {"country", CT::kText}});
  for (std::size_t i = 0; i < places.size(); ++i) {
    geo.rows.push_back({std::int64_t(i + 1), std::string(places[i].city), std::string(places[i].region),
                        std::string(places[i].country)});
  }

  auto& acc = b.table("Accommodation", {{"id", CT::kInteger}, {"name", CT::kText}, {"category", CT::kText}, {"stars", CT::kInteger}});
  const std::vector<std::string> acc_categories = {"hotel", "bed_and_breakfast", "apartment", "resort", "hostel"};
  const std::vector<std::string> acc_names = {"Aurora", "Belvedere", "Marina", "Olympia", "Riviera", "Sole", "Vista"};
  for (std::size_t i = 0, n = pick_count(12, 120, 400); i < n; ++i) {
    acc.rows.push_back({std::int64_t(i + 1), rng.pick(acc_names) + " " + std::to_string(i + 1),
                        rng.pick(acc_categories), rng.integer(1, 5)});
  }

  auto& poi = b.table("PointOfInterest", {{"id", CT::kInteger}, {"name", CT::kText}, {"kind", CT::kText}});
  const std::vector<std::string> poi_kinds = {"museum", "beach", "archaeological_site", "park", "church", "market"};
  for (std::size_t i = 0, n = pick_count(10, 80, 200); i < n; ++i) {
    poi.rows.push_back({std::int64_t(i + 1), "Site " + std::to_string(i + 1), rng.pick(poi_kinds)});
  }

  auto& car = b.table("CarRental", {{"id", CT::kInteger}, {"company", CT::kText}, {"car_class", CT::kText}});
  const std::vector<std::string> car_companies = {"Drivalia", "Maggiore", "Sicily by Car", "Europcar", "Hertz"};
  const std::vector<std::string> car_classes = {"economy", "compact", "suv", "van"};
  for (std::size_t i = 0, n = pick_count(8, 40, 100); i < n; ++i) {
    car.rows.push_back({std::int64_t(i + 1), rng.pick(car_companies), rng.pick(car_classes)});
  }

  auto& flight = b.table("Flight", {{"id", CT::kInteger}, {"airline", CT::kText}, {"cabin_class", CT::kText},
                                    {"origin_city", CT::kText}, {"destination_city", CT::kText}});
  const std::vector<std::string> airlines = {"ITA Airways", "Aegean", "Vueling", "Ryanair", "easyJet"};
  const std::vector<std::string> cabins = {"economy", "premium_economy", "business"};
  for (std::size_t i = 0, n = pick_count(10, 60, 200); i < n; ++i) {
    flight.rows.push_back({std::int64_t(i + 1), rng.pick(airlines), rng.pick(cabins), rng.pick(cities), rng.pick(cities)});
  }

  auto& ferry = b.table("Ferry", {{"id", CT::kInteger}, {"operator", CT::kText}, {"vessel_type", CT::kText},
                                  {"departure_city", CT::kText}, {"arrival_city", CT::kText}, {"route", CT::kText}});
  const std::vector<std::string> ferry_ops = {"Caronte", "Liberty Lines", "Grimaldi", "Blue Star", "Tirrenia"};
  const std::vector<std::string> vessels = {"hydrofoil", "catamaran", "ro_ro"};
  for (std::size_t i = 0, n = pick_count(8, 40, 100); i < n; ++i) {
    std::string from = rng.pick(cities), to = rng.pick(cities);
    ferry.rows.push_back({std::int64_t(i + 1), rng.pick(ferry_ops), rng.pick(vessels), from, to, from + " - " + to});
  }

  auto& taxi = b.table("Taxi", {{"id", CT::kInteger}, {"company", CT::kText}, {"vehicle_type", CT::kText}});
  const std::vector<std::string> taxi_cos = {"Radio Taxi", "CityCab", "Taxi Express"};
  const std::vector<std::string> vehicles = {"sedan", "minivan", "electric"};
  for (std::size_t i = 0, n = pick_count(8, 40, 100); i < n; ++i) {
    taxi.rows.push_back({std::int64_t(i + 1), rng.pick(taxi_cos), rng.pick(vehicles)});
  }

  auto& tour = b.table("Tour", {{"id", CT::kInteger}, {"operator", CT::kText}, {"tour_type", CT::kText}});
  const std::vector<std::string> tour_ops = {"Explore South", "Heritage Walks", "Island Hopper"};
  const std::vector<std::string> tour_types = {"walking", "boat", "food", "cultural"};
  for (std::size_t i = 0, n = pick_count(8, 40, 100); i < n; ++i) {
    tour.rows.push_back({std::int64_t(i + 1), rng.pick(tour_ops), rng.pick(tour_types)});
  }

  auto& tourist = b.table("Tourist", {{"id", CT::kInteger}, {"age", CT::kInteger}, {"age_band", CT::kText},
                                      {"generation", CT::kText}, {"nationality", CT::kText}, {"gender", CT::kText}});
  const std::vector<std::string> nationalities = {"IT", "DE", "FR", "US", "UK", "ES", "GR"};
  const std::vector<std::string> genders = {"female", "male", "unspecified"};
  for (std::size_t i = 0, n = pick_count(40, 2000, 10000); i < n; ++i) {
    std::int64_t age = rng.integer(18, 84);
    const char* band = age < 25 ? "18-24" : age < 35 ? "25-34" : age < 45 ? "35-44" : age < 55 ? "45-54" : age < 65 ? "55-64" : "65+";
    const char* gen = age < 25 ? "GenZ" : age < 45 ? "Millennial" : age < 55 ? "GenX" : "Boomer";
    tourist.rows.push_back({std::int64_t(i + 1), age, std::string(band), std::string(gen), rng.pick(nationalities), rng.pick(genders)});
  }

  GenResult result;
  for (const auto& r : review_tables()) {
    ReviewTruth t;
    t.intercept = detail::round_to(rng.uniform(2.5, 3.5), 1e-4);
    t.price = detail::round_to(rng.uniform(0.0005, 0.0015) * (rng.unit() < 0.5 ? -1.0 : 1.0), 1e-6);
    t.duration_days = detail::round_to(rng.uniform(-0.08, 0.08), 1e-4);
    result.truth[r] = t;
  }

  // fact rows; the reservation's own reviews are generated alongside
  std::vector<ColumnDef> fact_cols = {{"id", CT::kInteger}};
  for (const auto& d : dimension_tables()) fact_cols.push_back({fk_column(d), CT::kInteger});
  fact_cols.push_back({"price", CT::kReal});
  fact_cols.push_back({"party_size", CT::kInteger});
  fact_cols.push_back({"duration_days", CT::kInteger});
  std::vector<TableData*> reviews;
  for (const auto& r : review_tables()) {
    reviews.push_back(&b.table(r, {{"id", CT::kInteger}, {"channel", CT::kText}, {"language", CT::kText},
                                  {"score", CT::kReal}, {"verified", CT::kBoolean}}));
  }
  auto& fact = b.table("Reservation", fact_cols);
  const std::vector<std::string> channels = {"web", "app", "agency"};
  const std::vector<std::string> languages = {"it", "en", "de", "fr", "es"};
  std::map<std::string, const TableData*> dims_by_name;
  for (const auto& d : dimension_tables()) dims_by_name[d] = &b.data[d];

  for (std::size_t i = 0; i < n_fact; ++i) {
    auto id = static_cast<std::int64_t>(i + 1);
    Row row{id};
    std::map<std::string, std::int64_t> fk;
    for (const auto& d : dimension_tables()) {
      bool is_review = std::find(review_tables().begin(), review_tables().end(), d) != review_tables().end();
      fk[d] = is_review ? id : rng.integer(1, static_cast<std::int64_t>(dims_by_name[d]->rows.size()));
      row.emplace_back(fk[d]);
    }
    auto stars = std::get<std::int64_t>(acc.rows[static_cast<std::size_t>(fk["Accommodation"] - 1)][3]);
    std::int64_t party = rng.integer(1, 6);
    std::int64_t duration = rng.integer(1, 14);
    double price = detail::round_to(static_cast<double>(duration) * (35.0 + 22.0 * static_cast<double>(stars)) *
                                        std::sqrt(static_cast<double>(party)) * rng.uniform(0.75, 1.3),
                                    0.01);
    row.emplace_back(price);
    row.emplace_back(party);
    row.emplace_back(duration);
    fact.rows.push_back(std::move(row));

    for (std::size_t r = 0; r < reviews.size(); ++r) {
      const ReviewTruth& t = result.truth[review_tables()[r]];
      double score = t.intercept + t.price * price + t.duration_days * static_cast<double>(duration) +
                     t.noise_sigma * rng.normal();
      reviews[r]->rows.push_back({id, rng.pick(channels), rng.pick(languages), detail::round_to(score, 1e-4),
                                  rng.unit() < 0.8});
    }
  }

  b.schema.fact = "Reservation";
  for (const auto& d : dimension_tables()) b.schema.dimensions.push_back({d, fk_column(d), "id"});
  b.schema.hierarchies = {{"GeographicalArea", {"city", "region", "country"}},
                          {"Tourist", {"age_band", "generation"}}};
  b.schema.measures = {"price", "party_size", "duration_days"};
  // fact first, then dimensions in declaration order
  std::vector<TableDef> ordered{*b.schema.find_table("Reservation")};
  for (const auto& d : dimension_tables()) ordered.push_back(*b.schema.find_table(d));
  b.schema.tables = std::move(ordered);

  result.schema = b.schema;
  std::map<std::string, TableData> tables;
  for (auto& [name, t] : b.data) {
    result.row_counts[name] = t.rows.size();
    tables.emplace(name, std::move(t));
  }
  return {std::move(result), std::move(tables)};
}

inline nlohmann::ordered_json ground_truth_json(const GenResult& r, const GenConfig& config) {
  nlohmann::ordered_json j;
  j["seed"] = config.seed;
  j["scale"] = to_string(config.scale);
  j["score_model"] = "score = intercept + price * reservation.price + duration_days * reservation.duration_days + N(0, noise_sigma^2)";
  j["reviews"] = nlohmann::ordered_json::object();
  for (const auto& [name, t] : r.truth) {
    j["reviews"][name] = {{"intercept", t.intercept}, {"price", t.price}, {"duration_days", t.duration_days},
                          {"noise_sigma", t.noise_sigma}};
  }
  j["presets"] = nlohmann::ordered_json::object();
  for (const auto& p : presets()) j["presets"][p.name] = {{"target", p.target}, {"review_table", p.review_table}};
  j["row_counts"] = r.row_counts;
  return j;
}

/// Writes one CSV per table, schema.json, presets/<name>.codq, and
/// ground_truth.json into config.out_dir.
inline GenResult generate(const GenConfig& config) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(config.out_dir / "presets", ec);
  if (ec) throw IoError("cannot create '" + config.out_dir.string() + "': " + ec.message());

  auto [result, tables] = generate_tables(config.seed, config.scale);
  auto emit = [&](const fs::path& p, std::string_view text) {
    clustcube::detail::write_file(p, text);
    result.files.push_back(p);
  };
  for (const auto& t : result.schema.tables) emit(config.out_dir / (t.name + ".csv"), export_csv(tables.at(t.name)));
  emit(config.out_dir / "schema.json", write_schema_manifest(result.schema));
  for (const auto& p : presets()) emit(config.out_dir / "presets" / (p.name + ".codq"), p.codq);
  emit(config.out_dir / "ground_truth.json", ground_truth_json(result, config).dump(2) + "\n");
  return result;
}

inline std::map<std::string, ReviewTruth> load_ground_truth(const std::filesystem::path& path) {
  auto j = nlohmann::json::parse(clustcube::detail::read_file(path));
  std::map<std::string, ReviewTruth> out;
  for (const auto& [name, t] : j.at("reviews").items()) {
    out[name] = {t.at("intercept").get<double>(), t.at("price").get<double>(), t.at("duration_days").get<double>(),
                 t.at("noise_sigma").get<double>()};
  }
  return out;
}

}  // namespace clustcube::tourism
