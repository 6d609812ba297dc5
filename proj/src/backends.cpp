#include "sgs/backends.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "sgs/errors.hpp"
#include "sgs/scoring.hpp"

namespace sgs {

// Defined in helper_backends.cpp.
std::shared_ptr<Captioner> make_helper_captioner(const std::string& id, const BackendConfig& c);
std::shared_ptr<SentenceEncoder> make_helper_encoder(const std::string& id, const BackendConfig& c);
std::shared_ptr<JointEncoder> make_helper_joint_encoder(const std::string& id, const BackendConfig& c);
std::shared_ptr<VisionEncoder> make_helper_vision_encoder(const std::string& id, const BackendConfig& c);
std::shared_ptr<VlmAnswerer> make_helper_vlm(const std::string& id, const BackendConfig& c);

BackendConfig BackendConfig::stubs() {
    BackendConfig c;
    c.captioner_id = kStubBackend;
    c.encoder_id = kStubBackend;
    return c;
}

namespace stub {
namespace {

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(w);
    return words;
}

std::string stem_of(const ImageTensor& image) { return image.source.stem().string(); }

class StubCaptioner final : public Captioner {
public:
    Caption caption(const ImageTensor& image, int max_tokens) override {
        auto words = split_words(caption_table()[caption_bucket(stem_of(image))]);
        if (words.size() > static_cast<std::size_t>(max_tokens)) words.resize(max_tokens);
        Caption c;
        for (std::size_t i = 0; i < words.size(); ++i) c.text += (i ? " " : "") + words[i];
        c.token_budget = max_tokens;
        c.token_count = static_cast<int>(words.size());
        c.token_unit = "word";
        c.source_backend = kStubBackend;
        return c;
    }
    Concurrency concurrency() const override { return Concurrency::Concurrent; }
};

class StubEncoder final : public SentenceEncoder {
public:
    Embedding embed(const std::string& text) override { return bag_of_words(text); }
    Concurrency concurrency() const override { return Concurrency::Concurrent; }
};

class StubJointEncoder final : public JointEncoder {
public:
    Embedding embed_image(const ImageTensor& image) override {
        return bag_of_words(caption_table()[caption_bucket(stem_of(image))]);
    }
    Embedding embed_text(const std::string& text) override { return bag_of_words(text); }
    Concurrency concurrency() const override { return Concurrency::Concurrent; }
};

class StubVisionEncoder final : public VisionEncoder {
public:
    Embedding embed(const ImageTensor& image) override { return stem_vector(stem_of(image)); }
    Concurrency concurrency() const override { return Concurrency::Concurrent; }
};

class StubVlm final : public VlmAnswerer {
public:
    std::string answer(const ImageTensor& fg, const ImageTensor& bg, const std::string&) override {
        static const char* const answers[] = {
            "Yes, the scene looks plausible.",
            "No, the subject does not fit the background.",
            "It is hard to say.",
        };
        return answers[fnv1a64(stem_of(fg) + "|" + stem_of(bg)) % 3];
    }
    Concurrency concurrency() const override { return Concurrency::Concurrent; }
};

}  // namespace

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

const std::vector<std::string>& caption_table() {
    static const std::vector<std::string> table{
        "a man",
        "red desert",
        "a man standing in a field",
        "a woman giving a speech at a podium",
        "a green field under a blue sky",
        "a man giving a speech",
        "a busy city street at night",
        "a snowy mountain landscape",
        "a woman sitting on a bench in a park",
        "a park with trees and a bench",
        "the rocky landscape of mars",
        "a crowd of people in a park",
    };
    return table;
}

std::size_t caption_bucket(const std::string& stem) {
    return fnv1a64(stem) % caption_table().size();
}

Embedding bag_of_words(const std::string& text) {
    Embedding e;
    e.values.assign(kBagDim, 0.0);
    for (auto w : split_words(text)) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        e.values[fnv1a64(w) % kBagDim] = 1.0;
    }
    return e;
}

Embedding stem_vector(const std::string& stem) {
    std::mt19937_64 gen(fnv1a64(stem));
    Embedding e;
    e.values.resize(kVisionDim);
    double norm = 0.0;
    for (auto& v : e.values) {
        // top 53 bits -> [0,1) -> [-1,1); avoids implementation-defined distributions
        v = static_cast<double>(gen() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
        norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : e.values) v /= norm;
    return e;
}

std::shared_ptr<Captioner> make_captioner() { return std::make_shared<StubCaptioner>(); }
std::shared_ptr<SentenceEncoder> make_encoder() { return std::make_shared<StubEncoder>(); }
std::shared_ptr<JointEncoder> make_joint_encoder() { return std::make_shared<StubJointEncoder>(); }
std::shared_ptr<VisionEncoder> make_vision_encoder() { return std::make_shared<StubVisionEncoder>(); }
std::shared_ptr<VlmAnswerer> make_vlm() { return std::make_shared<StubVlm>(); }

}  // namespace stub

// ---------------------------------------------------------------------------
// Registry

BackendRegistry::BackendRegistry() {
    add_captioner(kStubBackend, [](const BackendConfig&) { return stub::make_captioner(); });
    add_encoder(kStubBackend, [](const BackendConfig&) { return stub::make_encoder(); });
    add_joint_encoder(kStubBackend, [](const BackendConfig&) { return stub::make_joint_encoder(); });
    add_vision_encoder(kStubBackend, [](const BackendConfig&) { return stub::make_vision_encoder(); });
    add_vlm(kStubBackend, [](const BackendConfig&) { return stub::make_vlm(); });
}

BackendRegistry& BackendRegistry::global() {
    static BackendRegistry registry;
    return registry;
}

namespace {

template <class T>
std::shared_ptr<T> make_from(std::mutex& mu,
                             const std::map<std::string, BackendRegistry::Factory<T>>& table,
                             const std::string& id, const BackendConfig& c, const char* kind,
                             std::shared_ptr<T> (*fallback)(const std::string&, const BackendConfig&)) {
    BackendRegistry::Factory<T> factory;
    {
        std::lock_guard lock(mu);
        if (auto it = table.find(id); it != table.end()) factory = it->second;
    }
    if (factory) {
        auto made = factory(c);
        if (!made) throw BackendUnavailable(std::string(kind) + " '" + id + "' failed to initialise");
        return made;
    }
    if (id.find('/') != std::string::npos) return fallback(id, c);
    throw ConfigError(std::string("unknown ") + kind + " '" + id + "'");
}

}  // namespace

void BackendRegistry::add_captioner(const std::string& id, Factory<Captioner> f) {
    std::lock_guard lock(mu_);
    captioners_[id] = std::move(f);
}
void BackendRegistry::add_encoder(const std::string& id, Factory<SentenceEncoder> f) {
    std::lock_guard lock(mu_);
    encoders_[id] = std::move(f);
}
void BackendRegistry::add_joint_encoder(const std::string& id, Factory<JointEncoder> f) {
    std::lock_guard lock(mu_);
    joint_[id] = std::move(f);
}
void BackendRegistry::add_vision_encoder(const std::string& id, Factory<VisionEncoder> f) {
    std::lock_guard lock(mu_);
    vision_[id] = std::move(f);
}
void BackendRegistry::add_vlm(const std::string& id, Factory<VlmAnswerer> f) {
    std::lock_guard lock(mu_);
    vlm_[id] = std::move(f);
}

std::shared_ptr<Captioner> BackendRegistry::make_captioner(const std::string& id,
                                                           const BackendConfig& c) const {
    return make_from(mu_, captioners_, id, c, "captioner", &make_helper_captioner);
}
std::shared_ptr<SentenceEncoder> BackendRegistry::make_encoder(const std::string& id,
                                                               const BackendConfig& c) const {
    return make_from(mu_, encoders_, id, c, "sentence encoder", &make_helper_encoder);
}
std::shared_ptr<JointEncoder> BackendRegistry::make_joint_encoder(const std::string& id,
                                                                  const BackendConfig& c) const {
    return make_from(mu_, joint_, id, c, "joint encoder", &make_helper_joint_encoder);
}
std::shared_ptr<VisionEncoder> BackendRegistry::make_vision_encoder(const std::string& id,
                                                                    const BackendConfig& c) const {
    return make_from(mu_, vision_, id, c, "vision encoder", &make_helper_vision_encoder);
}
std::shared_ptr<VlmAnswerer> BackendRegistry::make_vlm(const std::string& id,
                                                       const BackendConfig& c) const {
    return make_from(mu_, vlm_, id, c, "VLM", &make_helper_vlm);
}

bool BackendRegistry::has_captioner(const std::string& id) const {
    std::lock_guard lock(mu_);
    return captioners_.count(id) > 0 || id.find('/') != std::string::npos;
}
bool BackendRegistry::has_encoder(const std::string& id) const {
    std::lock_guard lock(mu_);
    return encoders_.count(id) > 0 || id.find('/') != std::string::npos;
}

// ---------------------------------------------------------------------------
// Backends

namespace {

template <class T, class F>
auto call(std::shared_ptr<T>& impl, std::mutex& mu, F&& f) {
    if (impl->concurrency() == Concurrency::Serialized) {
        std::lock_guard lock(mu);
        return f(*impl);
    }
    return f(*impl);
}

void check_embedding(const Embedding& e, std::atomic<std::size_t>& dim, const char* kind) {
    if (e.values.empty()) throw BackendUnavailable(std::string(kind) + " returned an empty embedding");
    for (double v : e.values)
        if (!std::isfinite(v)) throw DegenerateEmbedding(std::string(kind) + " returned a non-finite value");
    std::size_t expected = 0;
    if (!dim.compare_exchange_strong(expected, e.dim()) && expected != e.dim())
        throw BackendUnavailable(std::string(kind) + " changed dimension from " +
                                 std::to_string(expected) + " to " + std::to_string(e.dim()));
}

}  // namespace

Backends::Backends(BackendConfig config, const BackendRegistry& registry)
    : config_(std::move(config)) {
    if (config_.max_tokens < 1) throw ConfigError("max_tokens must be positive");
    captioner_.impl = registry.make_captioner(config_.captioner_id, config_);
    encoder_.impl = registry.make_encoder(config_.encoder_id, config_);
    if (config_.joint_encoder_id)
        joint_.impl = registry.make_joint_encoder(*config_.joint_encoder_id, config_);
    if (config_.vision_encoder_id)
        vision_.impl = registry.make_vision_encoder(*config_.vision_encoder_id, config_);
    if (config_.vlm_id) vlm_.impl = registry.make_vlm(*config_.vlm_id, config_);
}

Caption Backends::caption(const ImageTensor& image) {
    if (image.width != ImageTensor::kSide || image.height != ImageTensor::kSide)
        throw InvalidInput("captioner input must be preprocessed to 448x448");
    Caption c = call(captioner_.impl, captioner_.mu,
                     [&](Captioner& cap) { return cap.caption(image, config_.max_tokens); });
    if (c.text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw BackendUnavailable("captioner '" + config_.captioner_id + "' returned an empty caption");
    c.token_budget = config_.max_tokens;
    return c;
}

Embedding Backends::embed(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw InvalidInput("cannot embed empty text");
    Embedding e = call(encoder_.impl, encoder_.mu, [&](SentenceEncoder& enc) { return enc.embed(text); });
    check_embedding(e, encoder_.dim, "sentence encoder");
    return e;
}

double Backends::joint_similarity(const ImageTensor& image, const std::string& text) {
    if (!joint_.impl) throw ConfigError("no joint image-text encoder configured");
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw InvalidInput("cannot embed empty text");
    auto [img, txt] = call(joint_.impl, joint_.mu, [&](JointEncoder& j) {
        return std::pair{j.embed_image(image), j.embed_text(text)};
    });
    check_embedding(img, joint_.dim, "joint encoder");
    check_embedding(txt, joint_.dim, "joint encoder");
    return cosine(img, txt);
}

Embedding Backends::vision_embed(const ImageTensor& image) {
    if (!vision_.impl) throw ConfigError("no vision encoder configured");
    Embedding e = call(vision_.impl, vision_.mu, [&](VisionEncoder& v) { return v.embed(image); });
    check_embedding(e, vision_.dim, "vision encoder");
    return e;
}

std::string Backends::vlm_answer(const ImageTensor& fg, const ImageTensor& bg, const std::string& prompt) {
    if (!vlm_.impl) throw ConfigError("no VLM configured");
    return call(vlm_.impl, vlm_.mu, [&](VlmAnswerer& v) { return v.answer(fg, bg, prompt); });
}

}  // namespace sgs
