#include "multisql/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "multisql/error.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

std::string_view speaker_name(Speaker speaker) {
  switch (speaker) {
    case Speaker::kSystem: return "system";
    case Speaker::kUser: return "user";
    case Speaker::kAssistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (messages.empty()) throw Error(ErrorCode::kInvalidArgument, "chat request without messages");
  if (messages.front().speaker == Speaker::kAssistant) {
    throw Error(ErrorCode::kInvalidArgument, "first message must come from system or user");
  }
  if (!(temperature >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "negative temperature");
  if (max_tokens <= 0) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be positive");
}

std::string ChatRequest::joined_text() const {
  std::string out;
  for (const auto& m : messages) {
    if (!out.empty()) out += '\n';
    out += m.text;
  }
  return out;
}

// ---- mock ----------------------------------------------------------------

MockChatBackend::MockChatBackend(std::vector<MockEntry> entries)
    : entries_(std::move(entries)), consumed_(entries_.size(), false) {}

std::vector<MockEntry> MockChatBackend::parse_script(std::string_view jsonl) {
  std::vector<MockEntry> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      json record = json::parse(line);
      MockEntry entry;
      if (record.contains("match") && !record["match"].is_null()) {
        entry.match = record["match"].get<std::string>();
      }
      entry.response = record.at("response").get<std::string>();
      out.push_back(std::move(entry));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kConfigInvalid,
                  "mock script line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<MockEntry> MockChatBackend::load_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigInvalid, "cannot read mock script " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_script(buffer.str());
}

std::string MockChatBackend::chat(const ChatRequest& request) {
  request.validate();
  const std::string haystack = request.joined_text();
  std::lock_guard lock(mutex_);
  log_.push_back(request);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!consumed_[i] && entries_[i].match && haystack.find(*entries_[i].match) != std::string::npos) {
      consumed_[i] = true;
      return entries_[i].response;
    }
  }
  while (cursor_ < entries_.size() && (consumed_[cursor_] || entries_[cursor_].match)) ++cursor_;
  if (cursor_ >= entries_.size()) {
    throw Error(ErrorCode::kMockExhausted, "no scripted response left for role " + request.role_id);
  }
  consumed_[cursor_] = true;
  return entries_[cursor_++].response;
}

void MockChatBackend::append(MockEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
  consumed_.push_back(false);
}

std::size_t MockChatBackend::calls() const {
  std::lock_guard lock(mutex_);
  return log_.size();
}

std::size_t MockChatBackend::remaining() const {
  std::lock_guard lock(mutex_);
  std::size_t n = 0;
  for (bool c : consumed_) n += c ? 0 : 1;
  return n;
}

std::size_t MockChatBackend::cursor() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

std::vector<ChatRequest> MockChatBackend::requests() const {
  std::lock_guard lock(mutex_);
  return log_;
}

// ---- embeddings ----------------------------------------------------------

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

EmbeddingVector::EmbeddingVector(std::vector<double> v) : values(std::move(v)) {
  norm_cached = std::sqrt(dot(values, values));
  if (!(norm_cached > 0.0)) throw Error(ErrorCode::kInvalidArgument, "zero embedding vector");
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with different lengths");
  }
  const double c = dot(a.values, b.values) / (a.norm_cached * b.norm_cached);
  return std::clamp(c, -1.0, 1.0);
}

void EmbeddingBackend::validate_inputs(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::kInvalidArgument, "embed called with no texts");
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "embed called with an empty text");
  }
}

void EmbeddingBackend::check_dimensions(const std::vector<EmbeddingVector>& vectors) const {
  for (const auto& v : vectors) {
    if (v.dimension() != dimension()) {
      throw Error(ErrorCode::kDimensionMismatch, "expected dimension " + std::to_string(dimension()) +
                                                     ", got " + std::to_string(v.dimension()));
    }
  }
}

EmbeddingVector HashedNgramEmbedder::embed_one(std::string_view input) const {
  const std::string lowered = text::to_lower(input);
  std::vector<double> counts(dimension_, 0.0);
  if (lowered.size() < n_) {
    counts[text::fnv1a64(lowered) % dimension_] += 1.0;
  } else {
    for (std::size_t i = 0; i + n_ <= lowered.size(); ++i) {
      counts[text::fnv1a64(std::string_view(lowered).substr(i, n_)) % dimension_] += 1.0;
    }
  }
  EmbeddingVector raw(std::move(counts));
  for (auto& v : raw.values) v /= raw.norm_cached;
  return EmbeddingVector(std::move(raw.values));
}

std::vector<EmbeddingVector> HashedNgramEmbedder::embed(const std::vector<std::string>& texts) {
  validate_inputs(texts);
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

// ---- registry ------------------------------------------------------------

void BackendRegistry::bind(std::string role_id, std::shared_ptr<ChatBackend> backend) {
  roles_[std::move(role_id)] = std::move(backend);
}

void BackendRegistry::set_embedder(std::shared_ptr<EmbeddingBackend> embedder) {
  embedder_ = std::move(embedder);
}

bool BackendRegistry::has_role(std::string_view role_id) const {
  return roles_.find(role_id) != roles_.end();
}

std::shared_ptr<ChatBackend> BackendRegistry::shared_backend_for(std::string_view role_id) const {
  auto it = roles_.find(role_id);
  if (it == roles_.end() || !it->second) {
    throw Error(ErrorCode::kUnboundRole, "no backend bound to role " + std::string(role_id));
  }
  return it->second;
}

ChatBackend& BackendRegistry::backend_for(std::string_view role_id) const {
  return *shared_backend_for(role_id);
}

EmbeddingBackend& BackendRegistry::embedder() const {
  if (!embedder_) throw Error(ErrorCode::kUnboundRole, "no embedding provider configured");
  return *embedder_;
}

bool BackendRegistry::any_scripted() const {
  return std::any_of(roles_.begin(), roles_.end(), [](const auto& r) { return r.second->is_scripted(); });
}

std::string BackendRegistry::chat(const ChatRequest& request) const {
  return backend_for(request.role_id).chat(request);
}

}  // namespace multisql
