#include "multisql/config.hpp"

#include <cstdlib>
#include <set>

#include "multisql/error.hpp"
#include "multisql/jsonl.hpp"

namespace multisql {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::kConfigInvalid, what); }

void check_keys(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) invalid(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) invalid("unknown key " + where + "." + key);
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + " has the wrong type");
  }
}

std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

HttpEndpoint parse_endpoint(const json& j, const std::string& where) {
  HttpEndpoint e;
  e.url = get_or<std::string>(j, "url", "", where);
  e.model = get_or<std::string>(j, "model", "", where);
  e.api_key_env = get_or<std::string>(j, "api_key_env", "", where);
  e.timeout = std::chrono::milliseconds(get_or<std::int64_t>(j, "timeout_ms", 60000, where));
  e.retries = get_or<int>(j, "retries", 2, where);
  e.backoff = std::chrono::milliseconds(get_or<std::int64_t>(j, "backoff_ms", 500, where));
  if (e.url.empty() || e.model.empty()) invalid(where + " needs url and model");
  if (e.retries < 0) invalid(where + ".retries must be >= 0");
  return e;
}

}  // namespace

std::string generator_role(const std::string& generator_id) { return "generator:" + generator_id; }

PipelineConfig PipelineConfig::parse(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "config",
             {"backends", "roles", "embedding", "generators", "schema_filter", "execution", "selection", "templates",
              "sample_cap", "seed", "workers"});
  PipelineConfig cfg;

  if (!j.contains("backends") || !j["backends"].is_object()) invalid("config.backends must be an object");
  for (const auto& [name, spec] : j["backends"].items()) {
    const std::string where = "backends." + name;
    BackendSpec b;
    if (!spec.is_object()) invalid(where + " must be an object");
    b.type = get_or<std::string>(spec, "type", "", where);
    if (b.type == "mock") {
      check_keys(spec, where, {"type", "script"});
      const auto script = get_or<std::string>(spec, "script", "", where);
      if (script.empty()) invalid(where + ".script is required");
      b.script = resolve_path(base_dir, script);
      if (!std::filesystem::is_regular_file(b.script)) invalid(where + ".script not found: " + b.script.string());
    } else if (b.type == "http") {
      check_keys(spec, where, {"type", "url", "model", "api_key_env", "timeout_ms", "retries", "backoff_ms"});
      b.endpoint = parse_endpoint(spec, where);
    } else {
      invalid(where + ".type must be mock or http");
    }
    cfg.backends.emplace(name, std::move(b));
  }

  if (j.contains("roles")) {
    check_keys(j["roles"], "roles", {roles::kSchema, roles::kSelector, roles::kReformat});
    for (const auto& [role, backend] : j["roles"].items()) {
      if (!backend.is_string()) invalid("roles." + role + " must name a backend");
      if (!cfg.backends.contains(backend.get<std::string>())) invalid("roles." + role + ": unknown backend");
      cfg.roles[role] = backend.get<std::string>();
    }
  }

  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    check_keys(e, "embedding", {"type", "dimension", "url", "model", "api_key_env", "timeout_ms", "retries",
                                "backoff_ms"});
    cfg.embedding.type = get_or<std::string>(e, "type", "hashed", "embedding");
    cfg.embedding.dimension = get_or<std::size_t>(e, "dimension", cfg.embedding.dimension, "embedding");
    if (cfg.embedding.dimension == 0) invalid("embedding.dimension must be positive");
    if (cfg.embedding.type == "http") {
      cfg.embedding.endpoint = parse_endpoint(e, "embedding");
    } else if (cfg.embedding.type != "hashed") {
      invalid("embedding.type must be hashed or http");
    }
  }

  if (!j.contains("generators") || !j["generators"].is_array() || j["generators"].empty()) {
    invalid("config.generators must be a non-empty array");
  }
  for (std::size_t i = 0; i < j["generators"].size(); ++i) {
    const auto& g = j["generators"][i];
    const std::string where = "generators[" + std::to_string(i) + "]";
    check_keys(g, where, {"id", "backend", "template", "rank", "temperature", "demonstrations", "shots"});
    GeneratorSpec spec;
    spec.id = get_or<std::string>(g, "id", "", where);
    spec.backend = get_or<std::string>(g, "backend", "", where);
    spec.template_id = get_or<std::string>(g, "template", std::string(prompt_ids::kText2Sql), where);
    spec.rank = get_or<int>(g, "rank", static_cast<int>(i) + 1, where);
    spec.temperature = get_or<double>(g, "temperature", kGeneratorTemperature, where);
    spec.shots = get_or<std::size_t>(g, "shots", 5, where);
    if (auto demos = get_or<std::string>(g, "demonstrations", "", where); !demos.empty()) {
      spec.demonstrations = resolve_path(base_dir, demos);
    }
    if (spec.id.empty()) invalid(where + ".id is required");
    if (!cfg.backends.contains(spec.backend)) invalid(where + ".backend: unknown backend " + spec.backend);
    cfg.generators.push_back(std::move(spec));
  }

  if (j.contains("schema_filter")) {
    const auto& s = j["schema_filter"];
    const std::string where = "schema_filter";
    check_keys(s, where, {"iterations", "top_k_columns", "top_k_values", "value_threshold", "lsh", "vocabulary"});
    auto& r = cfg.settings.retrieval;
    cfg.settings.schema_iterations = get_or<int>(s, "iterations", 2, where);
    r.top_k_columns = get_or<std::size_t>(s, "top_k_columns", r.top_k_columns, where);
    r.top_k_values = get_or<std::size_t>(s, "top_k_values", r.top_k_values, where);
    r.value_threshold = get_or<double>(s, "value_threshold", r.value_threshold, where);
    if (s.contains("lsh")) {
      const auto& l = s["lsh"];
      check_keys(l, "schema_filter.lsh", {"enabled", "bands", "rows"});
      r.lsh_enabled = get_or<bool>(l, "enabled", true, "schema_filter.lsh");
      r.lsh_shape.bands = get_or<std::size_t>(l, "bands", r.lsh_shape.bands, "schema_filter.lsh");
      r.lsh_shape.rows = get_or<std::size_t>(l, "rows", r.lsh_shape.rows, "schema_filter.lsh");
      if (r.lsh_shape.bands == 0 || r.lsh_shape.rows == 0) invalid("schema_filter.lsh bands and rows must be positive");
    }
    if (auto vocab = get_or<std::string>(s, "vocabulary", "", where); !vocab.empty()) {
      cfg.vocabulary = resolve_path(base_dir, vocab);
      if (!std::filesystem::is_regular_file(cfg.vocabulary)) invalid("vocabulary not found: " + cfg.vocabulary.string());
    }
  }
  if (cfg.settings.schema_iterations < 1) invalid("schema_filter.iterations must be >= 1");

  if (j.contains("execution")) {
    const auto& e = j["execution"];
    check_keys(e, "execution", {"timeout_ms", "equivalence"});
    cfg.settings.timeout_ms = get_or<std::int64_t>(e, "timeout_ms", kDefaultTimeoutMs, "execution");
    if (cfg.settings.timeout_ms <= 0) invalid("execution.timeout_ms must be positive");
    try {
      cfg.settings.mode = parse_equivalence_mode(get_or<std::string>(e, "equivalence", "set", "execution"));
    } catch (const Error& err) {
      invalid(err.what());
    }
  }

  if (j.contains("selection")) {
    check_keys(j["selection"], "selection", {"policy"});
    cfg.settings.policy = parse_selector_policy(get_or<std::string>(j["selection"], "policy", "model", "selection"));
  }

  if (j.contains("templates")) {
    if (!j["templates"].is_object()) invalid("config.templates must be an object");
    for (const auto& [id, path] : j["templates"].items()) {
      if (!path.is_string()) invalid("templates." + id + " must be a path");
      auto p = resolve_path(base_dir, path.get<std::string>());
      if (!std::filesystem::is_regular_file(p)) invalid("template file not found: " + p.string());
      cfg.templates[id] = std::move(p);
    }
  }

  cfg.sample_cap = get_or<std::size_t>(j, "sample_cap", kDefaultSampleCap, "config");
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0, "config");
  cfg.settings.workers = get_or<std::size_t>(j, "workers", 4, "config");
  if (cfg.settings.workers == 0) invalid("config.workers must be >= 1");

  // Referenced templates must exist once overrides are applied.
  PromptLibrary library;
  for (const auto& g : cfg.generators) {
    if (!library.contains(g.template_id) && !cfg.templates.contains(g.template_id)) {
      invalid("generator " + g.id + " uses unknown template " + g.template_id);
    }
    if (g.template_id == prompt_ids::kIcl && g.demonstrations.empty()) {
      invalid("generator " + g.id + " uses " + std::string(prompt_ids::kIcl) + " without demonstrations");
    }
  }
  std::vector<GeneratorBinding> probe;
  for (const auto& g : cfg.generators) {
    GeneratorBinding b;
    b.generator_id = g.id;
    b.rank = g.rank;
    probe.push_back(std::move(b));
  }
  validate_bindings(probe);
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::string contents;
  try {
    contents = read_text(path);
  } catch (const Error& e) {
    invalid(std::string("cannot read config: ") + e.what());
  }
  json j;
  try {
    j = json::parse(contents);
  } catch (const json::parse_error& e) {
    invalid(path.string() + ": " + e.what());
  }
  return parse(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

std::filesystem::path locate_config(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') return env;
  invalid(std::string("no config file: pass --config or set ") + kConfigEnvVar);
}

Runtime build_runtime(const PipelineConfig& config) {
  Runtime rt;
  rt.backends = std::make_shared<BackendRegistry>();
  rt.prompts = std::make_shared<PromptLibrary>();
  for (const auto& [id, path] : config.templates) rt.prompts->load(id, path);

  for (const auto& [name, spec] : config.backends) {
    std::shared_ptr<ChatBackend> backend;
    if (spec.type == "mock") {
      backend = std::make_shared<MockChatBackend>(MockChatBackend::load_script(spec.script));
    } else {
      backend = std::make_shared<HttpChatBackend>(spec.endpoint);
    }
    rt.named_backends.emplace(name, std::move(backend));
  }
  for (const auto& [role, name] : config.roles) rt.backends->bind(role, rt.named_backends.at(name));

  std::shared_ptr<EmbeddingBackend> embedder;
  if (config.embedding.type == "http") {
    embedder = std::make_shared<HttpEmbeddingBackend>(config.embedding.endpoint, config.embedding.dimension);
  } else {
    embedder = std::make_shared<HashedNgramEmbedder>(config.embedding.dimension);
  }
  rt.backends->set_embedder(embedder);

  std::vector<GeneratorBinding> bindings;
  for (const auto& g : config.generators) {
    rt.backends->bind(generator_role(g.id), rt.named_backends.at(g.backend));
    GeneratorBinding b;
    b.generator_id = g.id;
    b.backend_role = generator_role(g.id);
    b.prompt_template_id = g.template_id;
    b.rank = g.rank;
    b.temperature = g.temperature;
    b.shots = g.shots;
    if (!g.demonstrations.empty()) {
      std::vector<DemonstrationPool::Demo> demos;
      for (auto& item : load_dataset(g.demonstrations, DatasetFlavor::kBird)) {
        demos.push_back({std::move(item.question), std::move(item.evidence), std::move(item.gold_sql)});
      }
      b.demonstrations = std::make_shared<const DemonstrationPool>(std::move(demos), embedder);
    }
    bindings.push_back(std::move(b));
  }

  SubwordTokenizer tokenizer;
  if (!config.vocabulary.empty()) tokenizer = SubwordTokenizer::from_file(config.vocabulary.string());
  rt.pipeline = std::make_unique<Pipeline>(rt.backends, rt.prompts, std::move(bindings), config.settings,
                                           std::move(tokenizer));
  return rt;
}

}  // namespace multisql
