#include "wire_backend.hpp"

#include <httplib.h>

#include <semaphore>

namespace shadowfix::backend::detail {

namespace {

struct WireFields {
    std::string prompt = "prompt";
    std::string max_tokens = "max_tokens";
    std::string temperature = "temperature";
};

class WireBackend final : public Backend {
public:
    WireBackend(ParsedUrl url, int timeout_seconds, int max_inflight, WireFields fields, std::string model_field,
                nlohmann::json::json_pointer response)
        : url_(std::move(url)),
          timeout_seconds_(timeout_seconds),
          inflight_(max_inflight),
          fields_(std::move(fields)),
          model_field_(std::move(model_field)),
          response_(std::move(response)) {}

    [[nodiscard]] std::string_view kind() const noexcept override { return "wire"; }

protected:
    std::string complete(const GenerateRequest& request) override {
        nlohmann::json body{{fields_.prompt, request.prompt.text},
                            {fields_.max_tokens, request.model.max_tokens},
                            {fields_.temperature, request.model.temperature}};
        if (!model_field_.empty()) {
            body[model_field_] = request.model.name;
        }

        inflight_.acquire();
        httplib::Result res;
        {
            httplib::Client client(url_.host, url_.port);
            client.set_connection_timeout(timeout_seconds_, 0);
            client.set_read_timeout(timeout_seconds_, 0);
            client.set_write_timeout(timeout_seconds_, 0);
            res = client.Post(url_.path, body.dump(), "application/json");
        }
        inflight_.release();

        if (!res) {
            throw BackendError(BackendErrc::unavailable, "request to " + url_.host + ":" + std::to_string(url_.port) +
                                                             " failed: " + httplib::to_string(res.error()));
        }
        if (res->status != 200) {
            throw BackendError(BackendErrc::unavailable, "inference server returned HTTP " + std::to_string(res->status));
        }
        try {
            const auto reply = nlohmann::json::parse(res->body);
            if (!reply.contains(response_) || !reply.at(response_).is_string()) {
                throw BackendError(BackendErrc::empty_completion,
                                   "response has no text at " + response_.to_string());
            }
            return reply.at(response_).get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(BackendErrc::empty_completion, std::string("unparseable response: ") + e.what());
        }
    }

private:
    ParsedUrl url_;
    int timeout_seconds_;
    std::counting_semaphore<> inflight_;
    WireFields fields_;
    std::string model_field_;
    nlohmann::json::json_pointer response_;
};

}  // namespace

std::shared_ptr<Backend> make_wire_backend(const nlohmann::json& config) {
    if (!config.contains("endpoint")) {
        throw BackendError(BackendErrc::invalid_config, "wire backend needs an endpoint");
    }
    const auto endpoint = config.at("endpoint").get<std::string>();
    auto url = parse_endpoint(endpoint);
    if (config.value("local_only", true) && !is_loopback_host(url.host)) {
        throw BackendError(BackendErrc::invalid_config,
                           "endpoint '" + endpoint + "' is not local; models must run on this machine");
    }
    const int timeout = config.value("timeout_seconds", 120);
    const int inflight = config.value("max_inflight", 1);
    if (timeout <= 0 || inflight <= 0) {
        throw BackendError(BackendErrc::invalid_config, "timeout_seconds and max_inflight must be positive");
    }
    WireFields fields;
    if (config.contains("fields")) {
        const auto& f = config.at("fields");
        fields.prompt = f.value("prompt", fields.prompt);
        fields.max_tokens = f.value("max_tokens", fields.max_tokens);
        fields.temperature = f.value("temperature", fields.temperature);
    }
    nlohmann::json::json_pointer pointer;
    try {
        pointer = nlohmann::json::json_pointer(config.value("response_pointer", std::string("/text")));
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(BackendErrc::invalid_config, std::string("response_pointer: ") + e.what());
    }
    return std::make_shared<WireBackend>(std::move(url), timeout, inflight, std::move(fields),
                                         config.value("model_field", std::string{}), std::move(pointer));
}

}  // namespace shadowfix::backend::detail
