#include "dertariff/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "dertariff/errors.hpp"
#include "dertariff/ingest.hpp"
#include "dertariff/synthetic.hpp"
#include "dertariff/welfare.hpp"

#ifndef DERTARIFF_VERSION
#define DERTARIFF_VERSION "dev"
#endif

namespace dertariff {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) line += (i ? "," : "") + cells[i];
  return line;
}

std::string settlement_name(const TwoPartTariff& t) { return t.separate_settlement() ? "separate" : "net_metering"; }

// One emitted tariff, re-checkable from the tariffs table alone.
struct TariffRecord {
  std::string table;
  std::size_t row;
  std::string family;
  IntegrationMode mode;
  double capacity_kw;
  double F;
  TwoPartTariff tariff;
};

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  std::size_t size() const { return rows_.size(); }

  void write(const fs::path& path, const std::string& run_id, const std::string& command) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "# run_id=" << run_id << " command=" << command << " version=" << DERTARIFF_VERSION << '\n';
    out << join(header_) << '\n';
    for (const auto& r : rows_) out << join(r) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

Table tariff_table(const std::vector<TariffRecord>& records, Eigen::Index horizon) {
  std::vector<std::string> header = {"table", "row",      "family", "mode", "capacity_kw",
                                     "settlement", "F", "connection_charge"};
  for (Eigen::Index t = 0; t < horizon; ++t) header.push_back("p" + std::to_string(t));
  Table table(std::move(header));
  for (const auto& r : records) {
    std::vector<std::string> row = {r.table,      std::to_string(r.row),        quoted(r.family),
                                    to_string(r.mode), num(r.capacity_kw), settlement_name(r.tariff),
                                    num(r.F),     num(r.tariff.connection_charge)};
    for (Eigen::Index t = 0; t < horizon; ++t) row.push_back(num(r.tariff.prices(t)));
    table.add(std::move(row));
  }
  return table;
}

struct Context {
  Study study;
  BaseCase base;
  fs::path out_dir;
};

Context open_study(const std::string& config_path, const std::string& out_override) {
  Study study = load_study(config_path);
  BaseCase base = base_case(study.model, study.scenarios, study.config.nominal_price,
                            study.config.nominal_connection_charge);
  fs::path out_dir = study.config.output_dir;
  if (const char* env = std::getenv("DERTARIFF_OUTPUT_DIR"); env && *env) out_dir = env;
  if (!out_override.empty()) out_dir = out_override;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  return Context{std::move(study), std::move(base), std::move(out_dir)};
}

// Writes the table, its tariffs table and the manifest; returns the run id.
std::string publish(const Context& ctx, const std::string& command, const std::string& stem, const json& options,
                    const Table& table, const std::vector<TariffRecord>& tariffs) {
  json identity;
  identity["command"] = command;
  identity["options"] = options;
  identity["version"] = DERTARIFF_VERSION;
  identity["config_digest"] = ctx.study.config_digest;
  identity["input_digests"] = ctx.study.input_digests;
  identity["F"] = ctx.study.F;
  identity["anchors"] = {{"revenue", ctx.base.revenue}, {"cs", ctx.base.cs}, {"rs", ctx.base.rs}};
  const std::string run_id = sha256_hex(identity.dump());

  const std::string table_name = stem + ".csv";
  const std::string tariffs_name = stem + "_tariffs.csv";
  table.write(ctx.out_dir / table_name, run_id, command);
  tariff_table(tariffs, ctx.study.model.horizon()).write(ctx.out_dir / tariffs_name, run_id, command);

  json manifest = identity;
  manifest["run_id"] = run_id;
  manifest["tables"] = {{"results", table_name}, {"tariffs", tariffs_name}};
  const fs::path manifest_path = ctx.out_dir / ("manifest_" + stem + ".json");
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest_path.string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing " + manifest_path.string());
  return run_id;
}

std::vector<TariffFamily> families_or_default(const std::vector<std::string>& given, const StudyConfig& cfg) {
  std::vector<TariffFamily> out;
  for (const auto& f : given.empty() ? cfg.families : given) out.push_back(TariffFamily::parse(f));
  return out;
}

std::vector<std::string> labels(const std::vector<TariffFamily>& families) {
  std::vector<std::string> out;
  for (const auto& f : families) out.push_back(f.label());
  return out;
}

int cmd_validate(const std::string& config_path, std::ostream& out) {
  const LoadedConfig loaded = load_config(config_path);
  const StudyConfig& cfg = loaded.config;
  const DaySeries prices = load_prices(cfg.prices_path, cfg.horizon);
  const DaySeries load = load_profile(cfg.load_path, ProfileKind::load, cfg.horizon);
  const DaySeries solar = load_profile(cfg.solar_path, ProfileKind::solar, cfg.horizon, cfg.solar_system_kw);
  const DemandModel model = build_model(cfg, load);
  const ScenarioSet set = build_scenarios(cfg, model, prices, load, solar);
  cfg.der_options().storage_template.validate();

  out << "config: " << config_path << "\n";
  out << "days: " << prices.values.size() << ", scenarios: " << set.size() << ", horizon: " << cfg.horizon << "\n";
  const Assumption1Report a1 = validate_assumption1(model, set);
  out << "price Jacobian eigenvalues: [" << num(a1.min_eigenvalue) << ", " << num(a1.max_eigenvalue) << "]\n";
  if (!a1.pass) {
    out << "FAIL: price Jacobian is not negative definite; largest eigenvalue " << num(a1.max_eigenvalue) << "\n";
    return kExitValidation;
  }
  out << "total elasticity at nominal price: "
      << num(total_elasticity(model, PriceVector::Constant(cfg.horizon, cfg.nominal_price))) << "\n";
  const double F = cfg.fixed_cost ? *cfg.fixed_cost : derive_F(cfg, model, set);
  out << "F: " << num(F) << "\n";
  out << "PASS\n";
  return kExitOk;
}

struct OptimizeArgs {
  std::string config;
  std::string out_dir;
  std::string mode = "none";
  std::string family = "optimal-two-part";
  std::string settlement = "net_metering";
  std::optional<double> F;
  double capacity_kw = 0.0;
};

int cmd_optimize(const OptimizeArgs& args, std::ostream& out) {
  const Context ctx = open_study(args.config, args.out_dir);
  const auto& st = ctx.study;
  const IntegrationMode mode = parse_integration_mode(args.mode);
  const TariffFamily family = TariffFamily::parse(args.family);
  if (args.settlement != "net_metering" && args.settlement != "separate")
    throw ValidationError("settlement must be net_metering or separate");
  const Settlement settlement = args.settlement == "separate" ? Settlement::separate : Settlement::net_metering;
  const double F = args.F.value_or(st.F);
  const IntegrationCase integration = make_der_case(st.model, mode, args.capacity_kw, st.config.der_options());

  const FamilySolution sol = optimize_family(family, st.model, st.scenarios, integration, F, settlement);
  const SurplusReport report = evaluate(sol.tariff, st.model, st.scenarios, integration);
  const double residual = report.rs - F;

  out << "family: " << family.label() << "  mode: " << to_string(mode) << "  settlement: " << args.settlement
      << "  capacity_kw: " << num(args.capacity_kw) << "\n";
  out << "F: " << num(F) << "\n";
  out << "A: " << num(sol.tariff.connection_charge) << "\n";
  out << "prices:";
  for (Eigen::Index t = 0; t < sol.tariff.prices.size(); ++t) out << ' ' << num(sol.tariff.prices(t));
  out << "\n";
  out << "cs: " << num(report.cs) << "  rs: " << num(report.rs) << "  sw: " << num(report.sw) << "\n";
  out << "revenue adequacy residual: " << num(residual) << " (relative " << num(residual / std::max(std::abs(F), 1.0))
      << ")\n";
  if (sol.near_infeasible) out << "note: target is at the family's revenue ceiling\n";
  if (report.diagnostics.extrapolated())
    out << "note: demand negative in " << report.diagnostics.negative_demand_cells << " cells (extrapolated)\n";

  std::vector<std::string> header = {"family", "mode", "settlement", "capacity_kw", "F", "connection_charge",
                                     "cs",     "rs",   "sw",         "residual",    "near_infeasible"};
  for (Eigen::Index t = 0; t < st.model.horizon(); ++t) header.push_back("p" + std::to_string(t));
  Table table(std::move(header));
  std::vector<std::string> row = {quoted(family.label()), to_string(mode), args.settlement, num(args.capacity_kw),
                                  num(F), num(sol.tariff.connection_charge), num(report.cs), num(report.rs),
                                  num(report.sw), num(residual), sol.near_infeasible ? "1" : "0"};
  for (Eigen::Index t = 0; t < sol.tariff.prices.size(); ++t) row.push_back(num(sol.tariff.prices(t)));
  table.add(std::move(row));

  const json options = {{"mode", args.mode},         {"family", family.label()}, {"settlement", args.settlement},
                        {"F", F},                    {"capacity_kw", args.capacity_kw}};
  const auto run_id = publish(ctx, "optimize", "optimize", options, table,
                              {{"optimize", 0, family.label(), mode, args.capacity_kw, F, sol.tariff}});
  out << "run_id: " << run_id << "\n";
  return kExitOk;
}

struct GridArgs {
  std::string config;
  std::string out_dir;
  std::string mode;
  std::vector<std::string> families;
  std::vector<double> grid;
  double capacity_kw = 0.0;
};

int cmd_pareto(const GridArgs& args, std::ostream& out) {
  const Context ctx = open_study(args.config, args.out_dir);
  const auto& st = ctx.study;
  const IntegrationMode mode = parse_integration_mode(args.mode.empty() ? "none" : args.mode);
  const IntegrationCase integration = make_der_case(st.model, mode, args.capacity_kw, st.config.der_options());
  const auto families = families_or_default(args.families, st.config);
  std::vector<double> grid = args.grid;
  if (grid.empty())
    for (double f : st.config.pareto_f_factors) grid.push_back(f * st.F);

  Table table({"family", "F", "feasible", "cs_gain", "rs_gain", "sw_gain", "near_infeasible", "connection_charge",
               "reason"});
  std::vector<TariffRecord> tariffs;
  std::size_t feasible = 0;
  for (const auto& family : families) {
    for (const auto& pt : pareto_front(family, st.model, st.scenarios, integration, grid, ctx.base)) {
      if (pt.feasible) {
        tariffs.push_back({"pareto", table.size(), family.label(), mode, args.capacity_kw, pt.F, pt.tariff});
        ++feasible;
        table.add({quoted(family.label()), num(pt.F), "1", num(pt.cs_gain), num(pt.rs_gain), num(pt.sw_gain),
                   pt.near_infeasible ? "1" : "0", num(pt.tariff.connection_charge), ""});
      } else {
        table.add({quoted(family.label()), num(pt.F), "0", "", num(pt.rs_gain), "", "", "", quoted(pt.reason)});
      }
    }
  }
  const json options = {{"mode", to_string(mode)}, {"capacity_kw", args.capacity_kw}, {"families", labels(families)},
                        {"F_grid", grid}};
  const auto run_id = publish(ctx, "pareto", "pareto", options, table, tariffs);
  out << "pareto: " << table.size() << " points (" << feasible << " feasible) -> " << (ctx.out_dir / "pareto.csv").string()
      << "\nrun_id: " << run_id << "\n";
  return feasible == 0 ? kExitInfeasible : kExitOk;
}

int cmd_sweep(const GridArgs& args, std::ostream& out) {
  const Context ctx = open_study(args.config, args.out_dir);
  const auto& st = ctx.study;
  const IntegrationMode mode = parse_integration_mode(args.mode.empty() ? "decentralized" : args.mode);
  if (mode == IntegrationMode::none) throw ValidationError("sweep needs --mode decentralized or centralized");
  const auto families = families_or_default(args.families, st.config);
  const std::vector<double> grid = args.grid.empty() ? st.config.capacity_grid_kw : args.grid;

  Table table({"mode", "capacity_kw", "family", "feasible", "cs_gain", "rs_gain", "sw_gain", "near_infeasible",
               "connection_charge", "reason"});
  std::vector<TariffRecord> tariffs;
  std::size_t feasible = 0;
  const auto rows = der_sweep(families, st.model, st.scenarios, mode, grid, st.config.der_options(), st.F, ctx.base);
  for (const auto& r : rows) {
    if (r.feasible) {
      tariffs.push_back({"sweep", table.size(), r.family, mode, r.capacity_kw, st.F, r.tariff});
      ++feasible;
      table.add({to_string(mode), num(r.capacity_kw), quoted(r.family), "1", num(r.cs_gain), num(r.rs_gain),
                 num(r.sw_gain), r.near_infeasible ? "1" : "0", num(r.tariff.connection_charge), ""});
    } else {
      table.add({to_string(mode), num(r.capacity_kw), quoted(r.family), "0", "", "", "", "", "", quoted(r.reason)});
    }
  }
  const std::string stem = "sweep_" + to_string(mode);
  const json options = {{"mode", to_string(mode)}, {"families", labels(families)}, {"capacity_grid_kw", grid}};
  const auto run_id = publish(ctx, "sweep", stem, options, table, tariffs);
  out << "sweep: " << table.size() << " cells (" << feasible << " feasible) -> "
      << (ctx.out_dir / (stem + ".csv")).string() << "\nrun_id: " << run_id << "\n";
  return feasible == 0 ? kExitInfeasible : kExitOk;
}

int cmd_xsub(const GridArgs& args, std::ostream& out) {
  const Context ctx = open_study(args.config, args.out_dir);
  const auto& st = ctx.study;
  const auto families = families_or_default(args.families, st.config);
  const std::vector<double> grid = args.grid.empty() ? st.config.xsub_capacity_grid_kw : args.grid;

  Table table({"family", "capacity_kw", "feasible", "contribution_net_metering", "contribution_separate", "subsidy",
               "reason"});
  std::vector<TariffRecord> tariffs;
  std::size_t feasible = 0;
  for (const auto& family : families) {
    for (const auto& r : cross_subsidy(family, st.model, st.scenarios, grid, st.config.der_options(), st.F)) {
      if (r.feasible) {
        const std::size_t row = table.size();
        tariffs.push_back({"xsub", row, family.label(), IntegrationMode::decentralized, r.capacity_kw, st.F,
                           r.net_metering});
        tariffs.push_back(
            {"xsub", row, family.label(), IntegrationMode::decentralized, r.capacity_kw, st.F, r.separate});
        ++feasible;
        table.add({quoted(family.label()), num(r.capacity_kw), "1", num(r.contribution_net_metering),
                   num(r.contribution_separate), num(r.subsidy), ""});
      } else {
        table.add({quoted(family.label()), num(r.capacity_kw), "0", "", "", "", quoted(r.reason)});
      }
    }
  }
  const json options = {{"families", labels(families)}, {"capacity_grid_kw", grid}};
  const auto run_id = publish(ctx, "xsub", "xsub", options, table, tariffs);
  out << "xsub: " << table.size() << " rows (" << feasible << " feasible) -> " << (ctx.out_dir / "xsub.csv").string()
      << "\nrun_id: " << run_id << "\n";
  return feasible == 0 ? kExitInfeasible : kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Revenue-adequate two-part tariffs with distributed energy resources", "dertariff"};
  app.require_subcommand(1);
  app.set_version_flag("--version", DERTARIFF_VERSION);

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Check inputs and the price Jacobian");
  validate->add_option("config", validate_config, "Study config (JSON)")->required();

  OptimizeArgs opt;
  double opt_f = 0.0;
  auto* optimize = app.add_subcommand("optimize", "Solve one tariff family for the revenue target");
  optimize->add_option("config", opt.config, "Study config (JSON)")->required();
  optimize->add_option("--mode", opt.mode, "none | decentralized | centralized");
  optimize->add_option("--family", opt.family, "Tariff family");
  optimize->add_option("--settlement", opt.settlement, "net_metering | separate");
  auto* f_opt = optimize->add_option("--F", opt_f, "Revenue target ($); default derived from the nominal tariff");
  optimize->add_option("--capacity", opt.capacity_kw, "DER PV capacity (kW)");
  optimize->add_option("--out", opt.out_dir, "Output directory");

  GridArgs pareto_args;
  auto* pareto = app.add_subcommand("pareto", "Pareto fronts over a grid of revenue targets");
  pareto->add_option("config", pareto_args.config, "Study config (JSON)")->required();
  pareto->add_option("--families", pareto_args.families, "Comma-separated families")->delimiter(',');
  pareto->add_option("--F-grid", pareto_args.grid, "Comma-separated revenue targets ($)")->delimiter(',');
  pareto->add_option("--mode", pareto_args.mode, "Integration mode (default none)");
  pareto->add_option("--capacity", pareto_args.capacity_kw, "DER PV capacity (kW)");
  pareto->add_option("--out", pareto_args.out_dir, "Output directory");

  GridArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "Welfare gains over a DER capacity grid");
  sweep->add_option("config", sweep_args.config, "Study config (JSON)")->required();
  sweep->add_option("--mode", sweep_args.mode, "decentralized | centralized");
  sweep->add_option("--families", sweep_args.families, "Comma-separated families")->delimiter(',');
  sweep->add_option("--capacity-grid", sweep_args.grid, "Comma-separated PV capacities (kW)")->delimiter(',');
  sweep->add_option("--out", sweep_args.out_dir, "Output directory");

  GridArgs xsub_args;
  auto* xsub = app.add_subcommand("xsub", "Cross-subsidies from net metering");
  xsub->add_option("config", xsub_args.config, "Study config (JSON)")->required();
  xsub->add_option("--families", xsub_args.families, "Comma-separated families")->delimiter(',');
  xsub->add_option("--capacity-grid", xsub_args.grid, "Comma-separated PV capacities (kW)")->delimiter(',');
  xsub->add_option("--out", xsub_args.out_dir, "Output directory");

  std::string synth_dir;
  SyntheticOptions synth;
  auto* gen = app.add_subcommand("gen-synthetic", "Write the deterministic synthetic dataset");
  gen->add_option("dir", synth_dir, "Target directory")->required();
  gen->add_option("--seed", synth.seed, "Random seed");
  gen->add_option("--days", synth.days, "Number of days");
  gen->add_flag("--correlated", synth.correlated, "Share a daily heat factor across price, load and solar");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e, out, err);
      return code == 0 ? kExitOk : kExitValidation;
    }
    if (*validate) return cmd_validate(validate_config, out);
    if (*optimize) {
      if (f_opt->count() > 0) opt.F = opt_f;
      return cmd_optimize(opt, out);
    }
    if (*pareto) return cmd_pareto(pareto_args, out);
    if (*sweep) return cmd_sweep(sweep_args, out);
    if (*xsub) return cmd_xsub(xsub_args, out);
    if (*gen) {
      write_synthetic_dataset(synth_dir, synth);
      out << "wrote synthetic dataset to " << synth_dir << "\n";
      return kExitOk;
    }
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << " (max revenue " << num(e.max_revenue()) << ")\n";
    return kExitInfeasible;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::domain_error& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace dertariff
