#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "sgs/image.hpp"

namespace sgs {

inline constexpr const char* kStubBackend = "stub";
inline constexpr const char* kDefaultCaptioner = "Salesforce/blip-image-captioning-base";
inline constexpr const char* kDefaultEncoder = "sentence-transformers/all-MiniLM-L6-v2";
inline constexpr int kDefaultMaxTokens = 16;

struct Caption {
    std::string text;
    int token_budget = kDefaultMaxTokens;
    int token_count = 0;
    std::string token_unit;  // "word" for stubs, "subword" for tokenizer-backed adapters
    std::string source_backend;
};

struct Embedding {
    std::vector<double> values;
    std::size_t dim() const { return values.size(); }
};

enum class Precision { Fp32 };

struct BackendConfig {
    std::string captioner_id = kDefaultCaptioner;
    std::string encoder_id = kDefaultEncoder;
    std::optional<std::string> joint_encoder_id;
    std::optional<std::string> vision_encoder_id;
    std::optional<std::string> vlm_id;
    Precision precision = Precision::Fp32;
    int max_tokens = kDefaultMaxTokens;
    std::uint64_t seed = 0;
    // argv of the out-of-process model helper; empty means
    // `$SGS_PYTHON -m sgs.hf_helper` (python3 when SGS_PYTHON is unset).
    std::vector<std::string> helper_command;

    static BackendConfig stubs();
};

// Whether one instance may be called from several threads at once.
enum class Concurrency { Concurrent, Serialized };

class Captioner {
public:
    virtual ~Captioner() = default;
    // Unprompted captioning; implementations must honour max_tokens.
    virtual Caption caption(const ImageTensor& image, int max_tokens) = 0;
    virtual Concurrency concurrency() const { return Concurrency::Serialized; }
};

class SentenceEncoder {
public:
    virtual ~SentenceEncoder() = default;
    virtual Embedding embed(const std::string& text) = 0;
    virtual Concurrency concurrency() const { return Concurrency::Serialized; }
};

// Contrastive image-text model (CLIP-style) sharing one embedding space.
class JointEncoder {
public:
    virtual ~JointEncoder() = default;
    virtual Embedding embed_image(const ImageTensor& image) = 0;
    virtual Embedding embed_text(const std::string& text) = 0;
    virtual Concurrency concurrency() const { return Concurrency::Serialized; }
};

class VisionEncoder {
public:
    virtual ~VisionEncoder() = default;
    virtual Embedding embed(const ImageTensor& image) = 0;
    virtual Concurrency concurrency() const { return Concurrency::Serialized; }
};

// Free-text answers to a yes/no question about a foreground/background pair.
class VlmAnswerer {
public:
    virtual ~VlmAnswerer() = default;
    virtual std::string answer(const ImageTensor& fg, const ImageTensor& bg,
                               const std::string& prompt) = 0;
    virtual Concurrency concurrency() const { return Concurrency::Serialized; }
};

// String id -> factory. Ids not registered explicitly but containing '/'
// (Hugging Face style) fall through to the out-of-process model helper.
class BackendRegistry {
public:
    template <class T>
    using Factory = std::function<std::shared_ptr<T>(const BackendConfig&)>;

    static BackendRegistry& global();

    void add_captioner(const std::string& id, Factory<Captioner> f);
    void add_encoder(const std::string& id, Factory<SentenceEncoder> f);
    void add_joint_encoder(const std::string& id, Factory<JointEncoder> f);
    void add_vision_encoder(const std::string& id, Factory<VisionEncoder> f);
    void add_vlm(const std::string& id, Factory<VlmAnswerer> f);

    // Throw ConfigError for unknown ids.
    std::shared_ptr<Captioner> make_captioner(const std::string& id, const BackendConfig& c) const;
    std::shared_ptr<SentenceEncoder> make_encoder(const std::string& id, const BackendConfig& c) const;
    std::shared_ptr<JointEncoder> make_joint_encoder(const std::string& id, const BackendConfig& c) const;
    std::shared_ptr<VisionEncoder> make_vision_encoder(const std::string& id, const BackendConfig& c) const;
    std::shared_ptr<VlmAnswerer> make_vlm(const std::string& id, const BackendConfig& c) const;

    bool has_captioner(const std::string& id) const;
    bool has_encoder(const std::string& id) const;

private:
    BackendRegistry();

    mutable std::mutex mu_;
    std::map<std::string, Factory<Captioner>> captioners_;
    std::map<std::string, Factory<SentenceEncoder>> encoders_;
    std::map<std::string, Factory<JointEncoder>> joint_;
    std::map<std::string, Factory<VisionEncoder>> vision_;
    std::map<std::string, Factory<VlmAnswerer>> vlm_;
};

// The backends one run uses, instantiated from a BackendConfig. Calls into
// Serialized backends are funnelled through a per-backend mutex, so a
// Backends object can be shared across worker threads.
class Backends {
public:
    explicit Backends(BackendConfig config,
                      const BackendRegistry& registry = BackendRegistry::global());

    const BackendConfig& config() const { return config_; }

    Caption caption(const ImageTensor& image);
    // Throws InvalidInput on empty text; checks dimension and finiteness.
    Embedding embed(const std::string& text);
    // Cosine between image and text under the joint encoder, in [-1,1].
    // Throws ConfigError if no joint encoder is configured.
    double joint_similarity(const ImageTensor& image, const std::string& text);
    Embedding vision_embed(const ImageTensor& image);
    std::string vlm_answer(const ImageTensor& fg, const ImageTensor& bg, const std::string& prompt);

    bool has_joint_encoder() const { return joint_.impl != nullptr; }
    bool has_vision_encoder() const { return vision_.impl != nullptr; }
    bool has_vlm() const { return vlm_.impl != nullptr; }

private:
    template <class T>
    struct Slot {
        std::shared_ptr<T> impl;
        std::mutex mu;
        std::atomic<std::size_t> dim{0};  // first embedding size seen; 0 = none yet
    };

    BackendConfig config_;
    Slot<Captioner> captioner_;
    Slot<SentenceEncoder> encoder_;
    Slot<JointEncoder> joint_;
    Slot<VisionEncoder> vision_;
    Slot<VlmAnswerer> vlm_;
};

// Deterministic offline backends. Exposed so tests can compute expected values by hand.
namespace stub {

std::uint64_t fnv1a64(std::string_view s);

inline constexpr std::size_t kBagDim = 256;
inline constexpr std::size_t kVisionDim = 32;

// Fixed caption table; a crop gets entry fnv1a64(filename stem) % size().
const std::vector<std::string>& caption_table();
std::size_t caption_bucket(const std::string& stem);

// Lowercased whitespace tokens, each setting its hashed slot to 1.
Embedding bag_of_words(const std::string& text);
// Unit vector drawn from a generator seeded by the stem hash.
Embedding stem_vector(const std::string& stem);

std::shared_ptr<Captioner> make_captioner();
std::shared_ptr<SentenceEncoder> make_encoder();
// Image side: bag of words of the image's stub caption. Text side: bag of words.
std::shared_ptr<JointEncoder> make_joint_encoder();
std::shared_ptr<VisionEncoder> make_vision_encoder();
// Yes / No / evasive, keyed by hash of both stems.
std::shared_ptr<VlmAnswerer> make_vlm();

}  // namespace stub

}  // namespace sgs
