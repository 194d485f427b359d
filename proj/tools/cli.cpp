#include "cli.hpp"

#include <CLI11.hpp>

#include <optional>

#include "multisql/config.hpp"
#include "multisql/data_synth.hpp"
#include "multisql/dataset.hpp"
#include "multisql/error.hpp"
#include "multisql/eval.hpp"
#include "multisql/jsonl.hpp"
#include "multisql/pipeline.hpp"
#include "multisql/schema.hpp"

namespace multisql::cli {

using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::size_t> workers;
  bool timings = false;
};

struct Question {
  std::string db;
  std::string db_id;
  std::string question;
  std::string evidence;
};

struct DatasetArgs {
  std::string path;
  std::string flavor = "bird";
  std::string db_root;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "Configuration file (default: $" + std::string(kConfigEnvVar) + ")");
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
  cmd->add_option("--workers", c.workers, "Concurrency cap")->check(CLI::PositiveNumber);
  cmd->add_flag("--timings", c.timings, "Include elapsed times in transcripts");
}

void add_question(CLI::App* cmd, Question& q) {
  cmd->add_option("db", q.db, "SQLite database file")->required();
  cmd->add_option("--question,-q", q.question, "Natural-language question")->required();
  cmd->add_option("--evidence,-e", q.evidence, "External knowledge");
  cmd->add_option("--db-id", q.db_id, "Database id shown in prompts (default: file stem)");
}

void add_dataset(CLI::App* cmd, DatasetArgs& d) {
  cmd->add_option("dataset", d.path, "Dataset file (BIRD or Spider JSON)")->required();
  cmd->add_option("--flavor", d.flavor, "bird or spider")
      ->check(CLI::IsMember({"bird", "spider"}))
      ->capture_default_str();
  cmd->add_option("--db-root", d.db_root, "Directory holding <db_id>/<db_id>.sqlite")->required();
}

struct Loaded {
  PipelineConfig config;
  Runtime runtime;
};

Loaded load(const Common& c) {
  auto path = locate_config(c.config.empty() ? std::nullopt : std::optional<std::string>(c.config));
  Loaded l{PipelineConfig::load(path), {}};
  if (c.seed) l.config.seed = *c.seed;
  if (c.workers) l.config.settings.workers = *c.workers;
  l.runtime = build_runtime(l.config);
  return l;
}

SchemaDocPtr open_doc(const Question& q, std::size_t sample_cap) {
  const std::filesystem::path db(q.db);
  const std::string id = q.db_id.empty() ? db.stem().string() : q.db_id;
  return std::make_shared<const SchemaDoc>(introspect(db, Dialect::kSqlite, sample_cap, id));
}

std::string render_rows(const ExecutionOutcome& outcome) {
  std::string out;
  for (std::size_t i = 0; i < outcome.column_names.size(); ++i) {
    out += (i ? "\t" : "") + outcome.column_names[i];
  }
  out += "\n";
  for (const auto& row : outcome.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "\t" : "") + cell_to_string(row[i]);
    out += "\n";
  }
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-generator text-to-SQL pipeline"};
  app.require_subcommand(1);

  Common common;
  Question question;
  DatasetArgs dataset;
  std::string introspect_db;
  std::string introspect_id;
  std::size_t introspect_cap = kDefaultSampleCap;
  bool execute_flag = false;
  std::string task;
  std::string style = "both";
  std::size_t list_size = 5;
  bool vary_negatives = false;

  auto* introspect_cmd = app.add_subcommand("introspect", "Print the rendered schema of a database");
  introspect_cmd->add_option("db", introspect_db, "SQLite database file")->required();
  introspect_cmd->add_option("--db-id", introspect_id, "Database id (default: file stem)");
  introspect_cmd->add_option("--sample-cap", introspect_cap, "Example values per column")->capture_default_str();
  introspect_cmd->add_option("--out", common.out, "Output directory");

  auto* link_cmd = app.add_subcommand("link", "Run schema filtering and write the report");
  add_question(link_cmd, question);
  add_common(link_cmd, common);

  auto* gen_cmd = app.add_subcommand("gen", "Generate and dump candidates");
  add_question(gen_cmd, question);
  add_common(gen_cmd, common);

  auto* ask_cmd = app.add_subcommand("ask", "Answer a question end to end");
  add_question(ask_cmd, question);
  add_common(ask_cmd, common);
  ask_cmd->add_flag("--execute", execute_flag, "Execute the chosen SQL and print its rows");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate on a dataset");
  add_dataset(eval_cmd, dataset);
  add_common(eval_cmd, common);

  auto* synth_cmd = app.add_subcommand("synth", "Build training records from a dataset");
  add_dataset(synth_cmd, dataset);
  add_common(synth_cmd, common);
  synth_cmd->add_option("--task", task, "multitask, selection or reformat")
      ->required()
      ->check(CLI::IsMember({"multitask", "selection", "reformat"}));
  synth_cmd->add_option("--style", style, "Reformat style: complex, standard or both")
      ->check(CLI::IsMember({"complex", "standard", "both"}))
      ->capture_default_str();
  synth_cmd->add_option("--list-size", list_size, "Candidates per selection sample")->capture_default_str();
  synth_cmd->add_flag("--vary-negatives", vary_negatives, "Cycle the number of wrong candidates per list");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  const std::filesystem::path out_dir(common.out);
  try {
    if (*introspect_cmd) {
      const std::filesystem::path db(introspect_db);
      const auto doc = introspect(db, Dialect::kSqlite, introspect_cap,
                                  introspect_id.empty() ? db.stem().string() : introspect_id);
      const std::string text = render_schema(doc);
      if (introspect_cmd->count("--out") > 0) write_text(out_dir / "schema.txt", text);
      out << text;
      return kOk;
    }

    if (*link_cmd || *gen_cmd || *ask_cmd) {
      const Loaded l = load(common);
      const auto& pipeline = *l.runtime.pipeline;
      const auto doc = open_doc(question, l.config.sample_cap);
      const std::filesystem::path db(question.db);
      if (*link_cmd) {
        const json report = link_transcript(pipeline.link(doc, db, question.question, question.evidence),
                                            pipeline.settings());
        write_text(out_dir / "link.json", dump_pretty(report) + "\n");
        out << dump_pretty(report) << "\n";
        return kOk;
      }
      if (*gen_cmd) {
        const auto run = pipeline.generate(doc, db, question.question, question.evidence);
        std::vector<json> records;
        for (const auto& c : run.candidates) records.push_back(c.to_json(common.timings));
        write_jsonl(out_dir / "candidates.jsonl", records);
        write_text(out_dir / "generation.json",
                   dump_pretty(generation_transcript(run, pipeline.settings(), common.timings)) + "\n");
        for (const auto& c : run.candidates) {
          out << c.generator_id << " S" << c.schema_index << " " << exec_status_name(c.outcome.status) << "\t"
              << c.sql << "\n";
        }
        return kOk;
      }
      const auto run = pipeline.ask(doc, db, question.question, question.evidence);
      write_text(out_dir / "transcript.json",
                 dump_pretty(ask_transcript(run, pipeline.settings(), common.timings)) + "\n");
      out << run.chosen_sql << "\n";
      if (execute_flag) {
        const auto outcome = execute(run.chosen_sql, db, pipeline.settings().timeout_ms);
        if (!outcome.has_rows()) {
          err << "execution failed: " << exec_status_name(outcome.status) << ": " << outcome.message << "\n";
          return kPipelineFailure;
        }
        out << render_rows(outcome);
      }
      return kOk;
    }

    const Loaded l = load(common);
    const auto& pipeline = *l.runtime.pipeline;
    const auto items = load_dataset(dataset.path, parse_flavor(dataset.flavor));
    const DatabaseCatalog catalog(dataset.db_root, l.config.sample_cap);

    if (*eval_cmd) {
      EvalOptions options{pipeline.settings().mode, pipeline.settings().timeout_ms, pipeline.settings().workers,
                          common.timings};
      const auto report = evaluate(pipeline, items, catalog, options);
      std::vector<json> records;
      for (const auto& r : report.results) records.push_back(r.to_json());
      write_jsonl(out_dir / "items.jsonl", records);
      write_text(out_dir / "report.json", dump_pretty(report.to_json()) + "\n");
      write_text(out_dir / "summary.txt", report.summary_table());
      out << report.summary_table();
      return kOk;
    }

    SynthStats stats;
    std::vector<TrainingSample> samples;
    json extra = json::object();
    if (task == "multitask") {
      MultitaskOptions options;
      options.seed = l.config.seed;
      options.timeout_ms = pipeline.settings().timeout_ms;
      options.mode = pipeline.settings().mode;
      samples = synth_multitask(items, catalog, pipeline.prompts(), options, stats);
    } else if (task == "selection") {
      BalancePolicy policy;
      policy.list_size = list_size;
      policy.vary_negatives = vary_negatives;
      policy.seed = l.config.seed;
      policy.timeout_ms = pipeline.settings().timeout_ms;
      policy.mode = pipeline.settings().mode;
      CandidateSource source = [&](const BenchItem& item) {
        return pipeline.generate(catalog.doc(item.db_id), catalog.db_file(item.db_id), item.question, item.evidence)
            .candidates;
      };
      samples = synth_selection(items, catalog, source, pipeline.prompts(), policy, stats);
      extra = balance_report(samples).to_json();
      write_text(out_dir / "balance.json", dump_pretty(extra) + "\n");
    } else {
      std::vector<ReformatStyle> styles;
      if (style != "standard") styles.push_back(ReformatStyle::kComplexPattern);
      if (style != "complex") styles.push_back(ReformatStyle::kStandardized);
      samples = synth_reformat(items, catalog, styles, pipeline.backends(), pipeline.prompts(), stats,
                               pipeline.settings().mode, pipeline.settings().timeout_ms);
    }
    std::vector<json> records;
    for (const auto& s : samples) records.push_back(s.to_json());
    write_jsonl(out_dir / "samples.jsonl", records);
    write_text(out_dir / "stats.json", dump_pretty(stats.to_json()) + "\n");
    out << samples.size() << " samples written to " << (out_dir / "samples.jsonl").string() << "\n";
    for (const auto& [name, n] : stats.emitted) out << "  " << name << ": " << n << "\n";
    return kOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfigInvalid || e.code() == ErrorCode::kInvalidArgument ? kUsage
                                                                                            : kPipelineFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kPipelineFailure;
  }
}

}  // namespace multisql::cli
