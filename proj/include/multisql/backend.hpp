#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace multisql {

enum class Speaker { kSystem, kUser, kAssistant };

std::string_view speaker_name(Speaker speaker);

struct Message {
  Speaker speaker = Speaker::kUser;
  std::string text;
};

// Well-known role ids. Generators use their own ids (SQLG_1 ...).
namespace roles {
inline constexpr std::string_view kSchema = "schema";
inline constexpr std::string_view kSelector = "selector";
inline constexpr std::string_view kReformat = "reformat";
}  // namespace roles

inline constexpr double kSchemaTemperature = 0.0;
inline constexpr double kSelectorTemperature = 0.0;
inline constexpr double kGeneratorTemperature = 0.1;

struct ChatRequest {
  std::string role_id;
  std::vector<Message> messages;
  double temperature = 0.0;
  int max_tokens = 1024;

  // Throws Error(kInvalidArgument) when the invariants are violated.
  void validate() const;
  // All message texts joined by newlines; what mock matchers search.
  std::string joined_text() const;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string chat(const ChatRequest& request) = 0;
  // Mock scripts must not be driven from several threads at once if a
  // deterministic transcript is wanted; generation uses this to serialize.
  virtual bool is_scripted() const { return false; }
};

struct MockEntry {
  std::optional<std::string> match;  // nullopt: sequential entry
  std::string response;
};

// Scripted chat backend. A call consumes the first unconsumed entry whose
// matcher is a substring of the request text; otherwise the next unconsumed
// sequential (match-less) entry.
class MockChatBackend final : public ChatBackend {
 public:
  MockChatBackend() = default;
  explicit MockChatBackend(std::vector<MockEntry> entries);

  // Line-delimited {"match": <string|null>, "response": <string>} records.
  static std::vector<MockEntry> parse_script(std::string_view jsonl);
  static std::vector<MockEntry> load_script(const std::filesystem::path& path);

  std::string chat(const ChatRequest& request) override;
  bool is_scripted() const override { return true; }

  void append(MockEntry entry);
  std::size_t calls() const;
  std::size_t remaining() const;
  // Index of the next sequential entry.
  std::size_t cursor() const;
  std::vector<ChatRequest> requests() const;

 private:
  mutable std::mutex mutex_;
  std::vector<MockEntry> entries_;
  std::vector<bool> consumed_;
  std::size_t cursor_ = 0;
  std::vector<ChatRequest> log_;
};

struct HttpEndpoint {
  std::string url;              // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string api_key_env;      // environment variable holding the bearer token
  std::chrono::milliseconds timeout{60000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};
};

// OpenAI-compatible chat-completion client.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(HttpEndpoint endpoint);
  std::string chat(const ChatRequest& request) override;

 private:
  HttpEndpoint endpoint_;
};

struct EmbeddingVector {
  std::vector<double> values;
  double norm_cached = 0.0;

  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> v);
  std::size_t dimension() const { return values.size(); }
};

double dot(std::span<const double> a, std::span<const double> b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::size_t dimension() const = 0;
  // One vector per input. Throws Error(kInvalidArgument) on empty input or
  // empty text, Error(kDimensionMismatch) when a vector has the wrong length.
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;

 protected:
  static void validate_inputs(const std::vector<std::string>& texts);
  void check_dimensions(const std::vector<EmbeddingVector>& vectors) const;
};

// Offline embedder: counts of lowercased character 3-grams hashed into a
// fixed number of buckets, L2-normalized.
class HashedNgramEmbedder final : public EmbeddingBackend {
 public:
  static constexpr std::size_t kDefaultDimension = 256;
  explicit HashedNgramEmbedder(std::size_t dimension = kDefaultDimension, std::size_t n = 3)
      : dimension_(dimension), n_(n) {}

  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  EmbeddingVector embed_one(std::string_view text) const;

 private:
  std::size_t dimension_;
  std::size_t n_;
};

// OpenAI-compatible /embeddings client.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dimension);
  std::size_t dimension() const override { return dimension_; }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

 private:
  HttpEndpoint endpoint_;
  std::size_t dimension_;
};

// Binds role ids to chat backends and holds the embedding provider.
class BackendRegistry {
 public:
  void bind(std::string role_id, std::shared_ptr<ChatBackend> backend);
  void set_embedder(std::shared_ptr<EmbeddingBackend> embedder);

  bool has_role(std::string_view role_id) const;
  // Throws Error(kUnboundRole).
  ChatBackend& backend_for(std::string_view role_id) const;
  std::shared_ptr<ChatBackend> shared_backend_for(std::string_view role_id) const;
  EmbeddingBackend& embedder() const;
  bool has_embedder() const { return embedder_ != nullptr; }
  // True if any bound role uses a scripted backend.
  bool any_scripted() const;

  std::string chat(const ChatRequest& request) const;

 private:
  std::map<std::string, std::shared_ptr<ChatBackend>, std::less<>> roles_;
  std::shared_ptr<EmbeddingBackend> embedder_;
};

}  // namespace multisql
