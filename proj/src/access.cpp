#include "iiot/access.hpp"

#include <arpa/nameser.h>
#include <netdb.h>
#include <netinet/in.h>
#include <resolv.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <regex>
#include <set>

#include "iiot/codecs.hpp"

namespace iiot {

std::string_view to_string(AccessStatus s) {
    switch (s) {
        case AccessStatus::open: return "open";
        case AccessStatus::default_credentials: return "default_credentials";
        case AccessStatus::protected_: return "protected";
        case AccessStatus::indeterminate: return "indeterminate";
    }
    return "indeterminate";
}

AccessStatus parse_access_status(std::string_view s) {
    for (auto a : {AccessStatus::open, AccessStatus::default_credentials, AccessStatus::protected_,
                   AccessStatus::indeterminate})
        if (to_string(a) == s) return a;
    throw AuditError("invalid access status: " + std::string(s));
}

namespace {

AccessVerdict verdict(AccessStatus s, std::string detail, std::vector<int> evidence = {}) {
    AccessVerdict v;
    v.status = s;
    v.detail = std::move(detail);
    v.evidence = std::move(evidence);
    return v;
}

// Reads one AMQP 0-9-1 method frame.
std::optional<amqp::Method> read_method(Channel& ch, Bytes& buf, Millis timeout) {
    auto complete = [](ByteView b) {
        try {
            return amqp::next_method(b).has_value();
        } catch (const AuditError&) {
            return true;
        }
    };
    auto more = read_until(ch, complete, timeout);
    buf.insert(buf.end(), more.begin(), more.end());
    try {
        auto m = amqp::next_method(buf);
        if (!m) return std::nullopt;
        buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(m->second));
        return m->first;
    } catch (const AuditError&) {
        return std::nullopt;
    }
}

}  // namespace

AccessVerdict amqp_default_credentials(const ChannelFactory& open, Millis timeout) {
    auto ch = open();
    if (!ch) return verdict(AccessStatus::indeterminate, "connection failed");
    try {
        ch->send(as_bytes(amqp::kHeader091));
        Bytes buf;
        auto start = read_method(*ch, buf, timeout);
        if (!start || start->class_id != 10 || start->method_id != 10)
            return verdict(AccessStatus::indeterminate, "no Connection.Start");
        ch->send(amqp::connection_start_ok(kAmqpDefaultUser, kAmqpDefaultPassword));
        auto reply = read_method(*ch, buf, timeout);
        if (!reply) {
            // Brokers without the auth-failure capability just drop the socket.
            return verdict(AccessStatus::protected_, "connection closed after Start-Ok");
        }
        if (reply->class_id == 10 && reply->method_id == 30) {
            ch->send(amqp::connection_close(200, "audit done"));
            read_method(*ch, buf, Millis{std::min<Millis::rep>(timeout.count(), 1000)});
            return verdict(AccessStatus::default_credentials, "Connection.Tune after default login");
        }
        if (reply->class_id == 10 && reply->method_id == 50) {
            const int code = amqp::close_code(*reply);
            ch->send(amqp::connection_close_ok());
            return verdict(AccessStatus::protected_, "Connection.Close", {code});
        }
        return verdict(AccessStatus::indeterminate, "unexpected method after Start-Ok");
    } catch (const AuditError& e) {
        return verdict(AccessStatus::indeterminate, e.what());
    }
}

AccessVerdict mqtt_open_access(const ChannelFactory& open, bool subscribe_root, const SubscriptionLimits& limits,
                               Millis timeout, const std::function<void(std::string_view)>& payload_sink) {
    auto ch = open();
    if (!ch) return verdict(AccessStatus::indeterminate, "connection failed");
    try {
        ch->send(mqtt::encode_connect({}));
        auto complete = [](ByteView b) {
            try {
                return mqtt::next_packet(b).has_value();
            } catch (const AuditError&) {
                return true;
            }
        };
        Bytes buf = read_until(*ch, complete, timeout, 64);
        std::optional<mqtt::Packet> connack;
        try {
            connack = mqtt::next_packet(buf);
        } catch (const AuditError&) {
        }
        if (!connack || connack->type != mqtt::kConnack || connack->body.size() != 2)
            return verdict(AccessStatus::indeterminate, "no CONNACK");
        const int rc = connack->body[1];
        if (rc != 0) return verdict(AccessStatus::protected_, "CONNACK refused", {rc});
        auto v = verdict(AccessStatus::open, "anonymous CONNACK accepted", {rc});
        if (!subscribe_root) {
            ch->send(mqtt::encode_disconnect());
            return v;
        }

        ch->send(mqtt::encode_subscribe(1, "#"));
        buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(connack->wire_size));
        const auto deadline = Clock::now() + limits.time_limit;
        Bytes pending = std::move(buf);
        v.payload_bytes_read = pending.size();
        for (;;) {
            try {
                while (auto p = mqtt::next_packet(pending)) {
                    if (auto pub = mqtt::parse_publish(*p)) {
                        ++v.messages_seen;
                        if (payload_sink)
                            payload_sink({reinterpret_cast<const char*>(pub->payload.data()), pub->payload.size()});
                    }
                    pending.erase(pending.begin(), pending.begin() + static_cast<std::ptrdiff_t>(p->wire_size));
                }
            } catch (const AuditError&) {
                v.detail += "; malformed packet during subscription";
                break;
            }
            if (v.payload_bytes_read >= limits.byte_limit) {
                v.detail += "; byte limit reached";
                break;
            }
            const auto left = std::chrono::duration_cast<Millis>(deadline - Clock::now());
            if (left <= Millis{0}) {
                v.detail += "; time limit reached";
                break;
            }
            auto chunk = ch->receive(limits.byte_limit - v.payload_bytes_read, std::min(left, timeout));
            if (!chunk) {
                if (Clock::now() >= deadline) v.detail += "; time limit reached";
                else v.detail += "; subscription idle";
                break;
            }
            if (chunk->empty()) {
                v.detail += "; broker closed subscription";
                break;
            }
            v.payload_bytes_read += chunk->size();
            pending.insert(pending.end(), chunk->begin(), chunk->end());
        }
        ch->send(mqtt::encode_disconnect());
        return v;
    } catch (const AuditError& e) {
        return verdict(AccessStatus::indeterminate, e.what());
    }
}

bool has_password_field(std::string_view html) {
    std::string lower(html);
    std::ranges::transform(lower, lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // libstdc++ regex recurses per character, so only single tags are matched.
    static const std::regex field(R"(^<input[^>]*type\s*=\s*["']?password)");
    constexpr std::size_t kMaxTag = 2048;
    for (auto pos = lower.find("<input"); pos != std::string::npos; pos = lower.find("<input", pos + 1)) {
        const auto end = lower.find('>', pos);
        const auto tag = lower.substr(pos, std::min(end == std::string::npos ? lower.size() : end, pos + kMaxTag) - pos);
        if (std::regex_search(tag, field)) return true;
    }
    return false;
}

AccessVerdict http_login_check(const ChannelFactory& open, Millis timeout) {
    auto ch = open();
    if (!ch) return verdict(AccessStatus::indeterminate, "connection failed");
    try {
        ch->send(as_bytes(http::get_request("localhost")));
        auto complete = [](ByteView b) {
            auto r = http::parse_response(b);
            if (!r) return false;
            auto it = r->headers.find("content-length");
            if (it == r->headers.end()) return false;
            return r->body.size() >= std::stoul(it->second);
        };
        auto buf = read_until(*ch, complete, timeout, 1 << 20);
        auto r = http::parse_response(buf);
        if (!r) return verdict(AccessStatus::indeterminate, "no HTTP response");
        std::vector<int> ev{r->status};
        if (r->status >= 400 && r->status < 500) return verdict(AccessStatus::protected_, "client error status", ev);
        if (r->status >= 200 && r->status < 300) {
            if (r->body.empty()) return verdict(AccessStatus::protected_, "empty page", ev);
            if (has_password_field(r->body)) return verdict(AccessStatus::protected_, "login form", ev);
            return verdict(AccessStatus::open, "content without login", ev);
        }
        return verdict(AccessStatus::indeterminate, "status " + std::to_string(r->status), ev);
    } catch (const std::exception& e) {
        return verdict(AccessStatus::indeterminate, e.what());
    }
}

MxResolver system_mx_resolver() {
    return [](const std::string& domain) -> std::optional<bool> {
        unsigned char answer[NS_PACKETSZ];
        const int n = res_query(domain.c_str(), ns_c_in, ns_t_mx, answer, sizeof answer);
        if (n < 0) {
            if (h_errno == HOST_NOT_FOUND || h_errno == NO_DATA) return false;
            return std::nullopt;
        }
        ns_msg msg;
        if (ns_initparse(answer, n, &msg) < 0) return std::nullopt;
        for (int i = 0; i < ns_msg_count(msg, ns_s_an); ++i) {
            ns_rr rr;
            if (ns_parserr(&msg, ns_s_an, i, &rr) == 0 && ns_rr_type(rr) == ns_t_mx) return true;
        }
        return false;
    };
}

namespace {

bool local_char(unsigned char c) { return std::isalnum(c) || std::strchr("._%+-", c); }
bool domain_char(unsigned char c) { return std::isalnum(c) || c == '-' || c == '.'; }

// Domain of at least two labels ending in an alphabetic TLD of 2 to 63
// characters.
bool plausible_domain(std::string_view d) {
    if (d.empty() || d.size() > 253) return false;
    std::size_t labels = 0;
    std::string_view last;
    for (std::size_t start = 0;;) {
        const auto dot = d.find('.', start);
        const auto label = d.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        if (label.empty() || label.size() > 63) return false;
        ++labels;
        last = label;
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return labels >= 2 && last.size() >= 2 &&
           std::ranges::all_of(last, [](unsigned char c) { return std::isalpha(c) != 0; });
}

}  // namespace

std::vector<EmailContact> extract_contacts(std::string_view text, const MxResolver& resolver) {
    std::vector<EmailContact> out;
    std::set<std::string> seen;
    for (auto at = text.find('@'); at != std::string_view::npos; at = text.find('@', at + 1)) {
        std::size_t l = at;
        while (l > 0 && at - l < 64 && local_char(text[l - 1])) --l;
        if (l == at || (l > 0 && local_char(text[l - 1]))) continue;  // empty or over-long local part
        std::size_t r = at + 1;
        while (r < text.size() && r - at <= 254 && domain_char(text[r])) ++r;
        auto domain = text.substr(at + 1, r - at - 1);
        while (!domain.empty() && (domain.back() == '.' || domain.back() == '-')) domain.remove_suffix(1);
        if (!plausible_domain(domain)) continue;

        const std::string addr(text.substr(l, at - l + 1 + domain.size()));
        std::string key = addr;
        std::ranges::transform(key, key.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (!seen.insert(key).second) continue;
        const auto mx = resolver(key.substr(key.find('@') + 1));
        if (mx && !*mx) continue;
        out.push_back({addr, mx.value_or(false)});
    }
    return out;
}

}  // namespace iiot
