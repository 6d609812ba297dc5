// Adapters that forward to a Python process hosting pretrained models.
// One JSON object per line in each direction; see python/sgs/hf_helper.py.

#include <atomic>
#include <cstdlib>
#include <map>
#include <mutex>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "sgs/backends.hpp"
#include "sgs/errors.hpp"
#include "sgs/subprocess.hpp"

namespace sgs {
namespace {

using nlohmann::json;

std::vector<std::string> helper_argv(const BackendConfig& c) {
    if (!c.helper_command.empty()) return c.helper_command;
    const char* py = std::getenv("SGS_PYTHON");
    return {py && *py ? py : "python3", "-m", "sgs.hf_helper"};
}

class HelperClient {
public:
    explicit HelperClient(std::vector<std::string> argv) : proc_(std::move(argv)) {}

    json call(const json& request) {
        std::string line;
        {
            std::lock_guard lock(mu_);
            line = proc_.request(request.dump());
        }
        json reply;
        try {
            reply = json::parse(line);
        } catch (const json::exception&) {
            throw BackendUnavailable("model helper sent a malformed reply: " + line.substr(0, 200));
        }
        if (!reply.value("ok", false))
            throw BackendUnavailable("model '" + request.value("model", std::string{}) +
                                     "': " + reply.value("error", std::string("unknown helper error")));
        return reply;
    }

    static std::shared_ptr<HelperClient> shared(const BackendConfig& c) {
        static std::mutex mu;
        static std::map<std::vector<std::string>, std::weak_ptr<HelperClient>> pool;
        const auto argv = helper_argv(c);
        std::lock_guard lock(mu);
        if (auto live = pool[argv].lock()) return live;
        auto fresh = std::make_shared<HelperClient>(argv);
        pool[argv] = fresh;
        return fresh;
    }

private:
    std::mutex mu_;
    Coprocess proc_;
};

// Scratch PNG for one request, removed on scope exit.
class TempImage {
public:
    explicit TempImage(const ImageTensor& image) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("sgs-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".png");
        write_png(image, path_);
    }
    ~TempImage() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    TempImage(const TempImage&) = delete;
    TempImage& operator=(const TempImage&) = delete;
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

Embedding to_embedding(const json& reply) {
    Embedding e;
    try {
        e.values = reply.at("vector").get<std::vector<double>>();
    } catch (const json::exception& ex) {
        throw BackendUnavailable(std::string("model helper reply lacks a vector: ") + ex.what());
    }
    return e;
}

class HelperBase {
public:
    HelperBase(std::string model, const BackendConfig& c)
        : model_(std::move(model)), client_(HelperClient::shared(c)) {}

protected:
    json request(const char* op) const {
        return json{{"op", op}, {"model", model_}, {"precision", "fp32"}};
    }

    std::string model_;
    std::shared_ptr<HelperClient> client_;
};

class HelperCaptioner final : public Captioner, HelperBase {
public:
    using HelperBase::HelperBase;
    Caption caption(const ImageTensor& image, int max_tokens) override {
        TempImage tmp(image);
        auto req = request("caption");
        req["image"] = tmp.str();
        req["max_tokens"] = max_tokens;
        const json reply = client_->call(req);
        Caption c;
        c.text = reply.value("text", std::string{});
        c.token_count = reply.value("tokens", 0);
        c.token_unit = reply.value("unit", std::string("subword"));
        c.token_budget = max_tokens;
        c.source_backend = model_;
        return c;
    }
};

class HelperEncoder final : public SentenceEncoder, HelperBase {
public:
    using HelperBase::HelperBase;
    Embedding embed(const std::string& text) override {
        auto req = request("embed");
        req["text"] = text;
        return to_embedding(client_->call(req));
    }
};

class HelperJointEncoder final : public JointEncoder, HelperBase {
public:
    using HelperBase::HelperBase;
    Embedding embed_image(const ImageTensor& image) override {
        TempImage tmp(image);
        auto req = request("embed_image");
        req["image"] = tmp.str();
        return to_embedding(client_->call(req));
    }
    Embedding embed_text(const std::string& text) override {
        auto req = request("embed_text");
        req["text"] = text;
        return to_embedding(client_->call(req));
    }
};

class HelperVisionEncoder final : public VisionEncoder, HelperBase {
public:
    using HelperBase::HelperBase;
    Embedding embed(const ImageTensor& image) override {
        TempImage tmp(image);
        auto req = request("vision_embed");
        req["image"] = tmp.str();
        return to_embedding(client_->call(req));
    }
};

class HelperVlm final : public VlmAnswerer, HelperBase {
public:
    using HelperBase::HelperBase;
    std::string answer(const ImageTensor& fg, const ImageTensor& bg, const std::string& prompt) override {
        TempImage f(fg), b(bg);
        auto req = request("answer");
        req["fg"] = f.str();
        req["bg"] = b.str();
        req["prompt"] = prompt;
        return client_->call(req).value("text", std::string{});
    }
};

}  // namespace

std::shared_ptr<Captioner> make_helper_captioner(const std::string& id, const BackendConfig& c) {
    return std::make_shared<HelperCaptioner>(id, c);
}
std::shared_ptr<SentenceEncoder> make_helper_encoder(const std::string& id, const BackendConfig& c) {
    return std::make_shared<HelperEncoder>(id, c);
}
std::shared_ptr<JointEncoder> make_helper_joint_encoder(const std::string& id, const BackendConfig& c) {
    return std::make_shared<HelperJointEncoder>(id, c);
}
std::shared_ptr<VisionEncoder> make_helper_vision_encoder(const std::string& id, const BackendConfig& c) {
    return std::make_shared<HelperVisionEncoder>(id, c);
}
std::shared_ptr<VlmAnswerer> make_helper_vlm(const std::string& id, const BackendConfig& c) {
    return std::make_shared<HelperVlm>(id, c);
}

}  // namespace sgs
