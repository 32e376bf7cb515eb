#include "dertariff/ingest.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "dertariff/errors.hpp"
#include "dertariff/welfare.hpp"

namespace dertariff {

namespace fs = std::filesystem;
using nlohmann::json;

std::string sha256_hex(const std::string& bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("SHA-256 computation failed");
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return out.str();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return buf.str();
}

DerOptions StudyConfig::der_options() const {
  DerOptions opt;
  opt.pv_unit_kw = pv_unit_kw;
  opt.storage_ratio = storage_ratio;
  opt.storage_template.capacity_kwh = storage_kwh;
  opt.storage_template.charge_rate_kw = storage_kw;
  opt.storage_template.discharge_rate_kw = storage_kw;
  opt.storage_template.efficiency = storage_efficiency;
  opt.allocation = allocation;
  return opt;
}

std::vector<TariffFamily> StudyConfig::parsed_families() const {
  std::vector<TariffFamily> out;
  for (const auto& f : families) out.push_back(TariffFamily::parse(f));
  return out;
}

void StudyConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  require(horizon >= 1, "study.horizon must be >= 1");
  require(customers >= 1.0 && std::isfinite(customers), "study.customers must be >= 1");
  require(classes >= 1, "study.classes must be >= 1");
  require(elasticity < 0.0, "study.elasticity must be negative, got " + std::to_string(elasticity));
  require(nominal_price > 0.0 && std::isfinite(nominal_price), "tariff.nominal_price must be positive");
  require(std::isfinite(nominal_connection_charge), "tariff.nominal_connection_charge must be finite");
  require(!fixed_cost || std::isfinite(*fixed_cost), "tariff.F must be finite");
  require(!families.empty(), "tariff.families must not be empty");
  require(!pareto_f_factors.empty(), "tariff.pareto_f_factors must not be empty");
  require(pv_unit_kw > 0.0, "der.pv_unit_kw must be positive");
  require(storage_ratio >= 0.0, "der.storage_ratio must be >= 0");
  require(storage_kwh > 0.0, "der.storage_kwh must be positive");
  require(storage_kw >= 0.0, "der.storage_kw must be >= 0");
  require(storage_efficiency > 0.0 && storage_efficiency <= 1.0, "der.storage_efficiency must lie in (0, 1]");
  require(solar_system_kw > 0.0, "der.solar_system_kw must be positive");
  for (double c : capacity_grid_kw) require(c >= 0.0 && std::isfinite(c), "der.capacity_grid_kw entries must be >= 0");
  for (double c : xsub_capacity_grid_kw)
    require(c >= 0.0 && std::isfinite(c), "der.xsub_capacity_grid_kw entries must be >= 0");
  if (slope_override) {
    require(slope_override->rows() == horizon && slope_override->cols() == horizon,
            "demand.slope_override must be horizon x horizon");
    require(slope_override->allFinite(), "demand.slope_override has non-finite entries");
  }
  parsed_families();
}

namespace {

template <class T>
T get_as(const json& value, const std::string& key) {
  try {
    return value.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key " + key + " has the wrong type");
  }
}

}  // namespace

LoadedConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object of sections");

  LoadedConfig out;
  StudyConfig& cfg = out.config;
  for (const auto& [section, body] : doc.items()) {
    if (section != "study" && section != "tariff" && section != "der" && section != "data" && section != "demand")
      throw ValidationError("unknown config section " + section);
    if (!body.is_object()) throw ValidationError("config section " + section + " must be an object");
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      if (section == "study") {
        if (key == "horizon")
          cfg.horizon = get_as<int>(value, name);
        else if (key == "customers")
          cfg.customers = get_as<double>(value, name);
        else if (key == "classes")
          cfg.classes = get_as<int>(value, name);
        else if (key == "sigma_rule") {
          const auto rule = get_as<std::string>(value, name);
          if (rule == "linear")
            cfg.sigma_rule = SigmaRule::linear;
          else if (rule == "uniform")
            cfg.sigma_rule = SigmaRule::uniform;
          else
            throw ValidationError("study.sigma_rule must be linear or uniform");
        } else if (key == "elasticity")
          cfg.elasticity = get_as<double>(value, name);
        else if (key == "scenario_mode") {
          const auto mode = get_as<std::string>(value, name);
          if (mode == "paired")
            cfg.scenario_mode = ScenarioMode::paired;
          else if (mode == "product")
            cfg.scenario_mode = ScenarioMode::product;
          else
            throw ValidationError("study.scenario_mode must be paired or product");
        } else if (key == "output_dir")
          cfg.output_dir = base_dir / get_as<std::string>(value, name);
        else
          throw ValidationError("unknown config key " + name);
      } else if (section == "tariff") {
        if (key == "nominal_price")
          cfg.nominal_price = get_as<double>(value, name);
        else if (key == "nominal_connection_charge")
          cfg.nominal_connection_charge = get_as<double>(value, name);
        else if (key == "F")
          cfg.fixed_cost = value.is_null() ? std::nullopt : std::optional<double>(get_as<double>(value, name));
        else if (key == "families")
          cfg.families = get_as<std::vector<std::string>>(value, name);
        else if (key == "pareto_f_factors")
          cfg.pareto_f_factors = get_as<std::vector<double>>(value, name);
        else
          throw ValidationError("unknown config key " + name);
      } else if (section == "der") {
        if (key == "pv_unit_kw")
          cfg.pv_unit_kw = get_as<double>(value, name);
        else if (key == "storage_ratio")
          cfg.storage_ratio = get_as<double>(value, name);
        else if (key == "storage_kwh")
          cfg.storage_kwh = get_as<double>(value, name);
        else if (key == "storage_kw")
          cfg.storage_kw = get_as<double>(value, name);
        else if (key == "storage_efficiency")
          cfg.storage_efficiency = get_as<double>(value, name);
        else if (key == "allocation")
          cfg.allocation = parse_allocation_rule(get_as<std::string>(value, name));
        else if (key == "solar_system_kw")
          cfg.solar_system_kw = get_as<double>(value, name);
        else if (key == "capacity_grid_kw")
          cfg.capacity_grid_kw = get_as<std::vector<double>>(value, name);
        else if (key == "xsub_capacity_grid_kw")
          cfg.xsub_capacity_grid_kw = get_as<std::vector<double>>(value, name);
        else
          throw ValidationError("unknown config key " + name);
      } else if (section == "data") {
        const fs::path p = base_dir / get_as<std::string>(value, name);
        if (key == "prices")
          cfg.prices_path = p;
        else if (key == "load")
          cfg.load_path = p;
        else if (key == "solar")
          cfg.solar_path = p;
        else
          throw ValidationError("unknown config key " + name);
      } else if (section == "demand") {
        if (key != "slope_override") throw ValidationError("unknown config key " + name);
        const auto rows = get_as<std::vector<std::vector<double>>>(value, name);
        Matrix m(static_cast<Eigen::Index>(rows.size()), rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
          if (rows[i].size() != rows[0].size()) throw ValidationError("demand.slope_override rows differ in length");
          for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        cfg.slope_override = std::move(m);
      } else {
        throw ValidationError("unknown config section " + section);
      }
    }
  }
  // Defaults that name files live next to the config as well.
  if (!doc.contains("data") || !doc["data"].contains("prices")) cfg.prices_path = base_dir / cfg.prices_path;
  if (!doc.contains("data") || !doc["data"].contains("load")) cfg.load_path = base_dir / cfg.load_path;
  if (!doc.contains("data") || !doc["data"].contains("solar")) cfg.solar_path = base_dir / cfg.solar_path;
  if (!doc.contains("study") || !doc["study"].contains("output_dir")) cfg.output_dir = base_dir / cfg.output_dir;

  cfg.validate();
  out.digest = sha256_hex(doc.dump());
  return out;
}

LoadedConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

DaySeries read_series(const fs::path& path, const std::string& header, int horizon, double divisor, bool nonnegative) {
  std::istringstream in(read_file(path));
  const std::string where = path.filename().string();
  std::string line;
  if (!std::getline(in, line) || trim(line) != header)
    throw ValidationError(where + ": expected header '" + header + "'");

  std::map<std::string, std::vector<std::optional<double>>> days;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const std::string at = where + ":" + std::to_string(line_no) + ": ";
    std::vector<std::string> fields;
    std::stringstream ss(row);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(trim(field));
    if (fields.size() != 3) throw ValidationError(at + "expected 3 fields");
    const std::string& date = fields[0];
    if (date.empty()) throw ValidationError(at + "empty date");

    std::size_t used = 0;
    long period = -1;
    double value = 0.0;
    try {
      period = std::stol(fields[1], &used);
      if (used != fields[1].size()) period = -1;
      value = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw ValidationError(at + "malformed value");
    } catch (const std::logic_error&) {
      throw ValidationError(at + "malformed number");
    }
    if (period < 0 || period >= horizon) throw ValidationError(at + "period_index out of range");
    if (!std::isfinite(value)) throw ValidationError(at + "non-finite value");
    if (nonnegative && value < 0.0) throw ValidationError(at + "negative value");

    auto& slots = days[date];
    if (slots.empty()) slots.resize(static_cast<std::size_t>(horizon));
    auto& slot = slots[static_cast<std::size_t>(period)];
    if (slot) throw ValidationError(at + "duplicate period " + std::to_string(period) + " for " + date);
    slot = value / divisor;
  }
  if (days.empty()) throw ValidationError(where + ": no data rows");

  DaySeries out;
  for (const auto& [date, slots] : days) {
    Vector v(horizon);
    std::size_t present = 0;
    for (int t = 0; t < horizon; ++t) {
      if (slots[static_cast<std::size_t>(t)]) {
        v(t) = *slots[static_cast<std::size_t>(t)];
        ++present;
      }
    }
    if (present != static_cast<std::size_t>(horizon))
      throw ValidationError(where + ": day " + date + " has " + std::to_string(present) + " rows, expected " +
                            std::to_string(horizon));
    out.dates.push_back(date);
    out.values.push_back(std::move(v));
  }
  return out;
}

}  // namespace

DaySeries load_prices(const fs::path& path, int horizon) {
  return read_series(path, "date,period_index,price_usd_per_mwh", horizon, 1000.0, false);
}

DaySeries load_profile(const fs::path& path, ProfileKind kind, int horizon, double system_kw) {
  if (!(system_kw > 0.0)) throw ValidationError("system rating must be positive");
  const bool solar = kind == ProfileKind::solar;
  return read_series(path, "date,period_index,kwh", horizon, solar ? system_kw : 1.0, solar);
}

Vector mean_profile(const DaySeries& series) {
  if (series.values.empty()) throw ValidationError("empty profile series");
  Vector acc = Vector::Zero(series.values.front().size());
  for (const auto& v : series.values) acc += v;
  return acc / static_cast<double>(series.values.size());
}

DemandModel build_model(const StudyConfig& config, const DaySeries& load) {
  const Vector sales = mean_profile(load);
  const PriceVector price = PriceVector::Constant(config.horizon, config.nominal_price);
  const std::vector<double> customers(static_cast<std::size_t>(config.classes),
                                      config.customers / static_cast<double>(config.classes));
  DemandModel calibrated = calibrate(sales, price, config.elasticity, customers, config.sigma_rule);
  if (!config.slope_override) return calibrated;

  const Vector unit = sales / calibrated.sigma_total();
  Vector base = unit + *config.slope_override * price;
  return DemandModel(calibrated.sigma(), std::move(base), *config.slope_override, price, customers);
}

ScenarioSet build_scenarios(const StudyConfig& config, const DemandModel& model, const DaySeries& prices,
                            const DaySeries& load, const DaySeries& solar) {
  const std::size_t K = prices.values.size();
  if (K == 0) throw ValidationError("no price days");
  if (load.values.size() != K || solar.values.size() != K)
    throw ValidationError("price, load and solar files must cover the same number of days (" + std::to_string(K) +
                          ", " + std::to_string(load.values.size()) + ", " + std::to_string(solar.values.size()) + ")");

  const Vector mean_load = mean_profile(load);
  const double weight = model.sigma_total();
  std::vector<Scenario> scenarios;
  scenarios.reserve(K);
  for (std::size_t k = 0; k < K; ++k) {
    Scenario s;
    s.probability = 1.0 / static_cast<double>(K);
    s.lambda = prices.values[k];
    const Vector deviation = load.values[k] - mean_load;
    for (std::size_t c = 0; c < model.num_classes(); ++c) {
      s.disturbances.push_back(model.sigma()[c] * deviation / weight);
      s.renewable_customer.push_back(solar.values[k]);
    }
    s.renewable_retailer = solar.values[k];
    scenarios.push_back(std::move(s));
  }
  ScenarioSet paired(config.horizon, std::move(scenarios));
  return config.scenario_mode == ScenarioMode::product ? split_marginals(paired) : paired;
}

double derive_F(const StudyConfig& config, const DemandModel& model, const ScenarioSet& set) {
  TwoPartTariff nominal;
  nominal.connection_charge = config.nominal_connection_charge;
  nominal.prices = PriceVector::Constant(config.horizon, config.nominal_price);
  return evaluate(nominal, model, set, IntegrationCase{}).rs;
}

Study load_study(const fs::path& config_path) {
  LoadedConfig loaded = load_config(config_path);
  const StudyConfig& cfg = loaded.config;
  const DaySeries prices = load_prices(cfg.prices_path, cfg.horizon);
  const DaySeries load = load_profile(cfg.load_path, ProfileKind::load, cfg.horizon);
  const DaySeries solar = load_profile(cfg.solar_path, ProfileKind::solar, cfg.horizon, cfg.solar_system_kw);

  std::map<std::string, std::string> digests;
  for (const auto& p : {cfg.prices_path, cfg.load_path, cfg.solar_path})
    digests[p.filename().string()] = sha256_hex(read_file(p));

  DemandModel model = build_model(cfg, load);
  ScenarioSet set = build_scenarios(cfg, model, prices, load, solar);
  const double F = cfg.fixed_cost ? *cfg.fixed_cost : derive_F(cfg, model, set);
  return Study{cfg, loaded.digest, std::move(digests), std::move(model), std::move(set), F};
}

}  // namespace dertariff
