#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "iiot/socket.hpp"

// Application-layer access checks for AMQP, MQTT and the Fox Platform web
// interface. Every outbound message is a session setup, a subscription or
// a GET; nothing is ever published or written.

namespace iiot {

enum class AccessStatus : std::uint8_t { open, default_credentials, protected_, indeterminate };
std::string_view to_string(AccessStatus s);
AccessStatus parse_access_status(std::string_view s);

struct AccessVerdict {
    AccessStatus status = AccessStatus::indeterminate;
    std::vector<int> evidence;  ///< protocol codes: CONNACK rc, AMQP close code, HTTP status
    std::size_t payload_bytes_read = 0;
    std::size_t messages_seen = 0;
    std::string detail;
};

/// Opens a fresh session to the endpoint under test; nullptr on failure.
using ChannelFactory = std::function<std::unique_ptr<Channel>()>;

/// The stock RabbitMQ account.
inline constexpr std::string_view kAmqpDefaultUser = "guest";
inline constexpr std::string_view kAmqpDefaultPassword = "guest";

/// Logs in with the default account and closes the connection right after
/// the broker answers; no channel is opened.
AccessVerdict amqp_default_credentials(const ChannelFactory& open, Millis timeout);

struct SubscriptionLimits {
    Millis time_limit = std::chrono::minutes{30};
    std::size_t byte_limit = 10'000'000;
};

/// CONNECT without credentials. With `subscribe_root`, an open broker is
/// additionally subscribed to "#" and messages are counted until a limit
/// is hit. Payload text (at most byte_limit bytes) goes to `payload_sink`
/// for contact extraction and is not kept otherwise.
AccessVerdict mqtt_open_access(const ChannelFactory& open, bool subscribe_root, const SubscriptionLimits& limits,
                               Millis timeout, const std::function<void(std::string_view)>& payload_sink = {});

/// GET / and look for an error status, an empty page or a password field.
AccessVerdict http_login_check(const ChannelFactory& open, Millis timeout);

/// True when the HTML contains an <input> of type password.
bool has_password_field(std::string_view html);

struct EmailContact {
    std::string address;
    bool mx_verified = false;
};

/// nullopt when the lookup itself failed; otherwise whether the domain
/// has at least one MX record.
using MxResolver = std::function<std::optional<bool>(const std::string& domain)>;
MxResolver system_mx_resolver();

/// Email-shaped tokens from `text`, de-duplicated in order of appearance.
/// Domains without MX records are dropped; resolver failures keep the
/// address with mx_verified=false.
std::vector<EmailContact> extract_contacts(std::string_view text, const MxResolver& resolver);

}  // namespace iiot
