#include <gtest/gtest.h>

#include "iiot/lab.hpp"
#include "iiot/lab_run.hpp"

using namespace iiot;
using namespace std::chrono_literals;

namespace {

lab::Scenario canonical(const std::string& name) {
    for (auto& s : lab::canonical_suite())
        if (s.name == name) return s;
    throw std::runtime_error("no scenario " + name);
}

/// One live lab server plus a client able to open sessions to it.
class LiveServer {
public:
    explicit LiveServer(lab::Scenario s)
        : scenario_(std::move(s)),
          pki_(lab::Pki::create(std::chrono::time_point_cast<std::chrono::seconds>(std::chrono::system_clock::now()))),
          bank_(pki_),
          server_(lab::spawn(scenario_, bank_, pki_)),
          dialer_(CidrSet{}, lab::lab_timeouts()),
          identity_(ClientIdentity::create("https://lab.example/test")),
          prober_(dialer_, identity_) {}
    ~LiveServer() { server_->stop(); }

    ChannelFactory factory() {
        const auto ep = server_->endpoint();
        const bool tls = !scenario_.plaintext;
        return [this, ep, tls] { return prober_.open_session(ep, tls); };
    }
    lab::Server& server() { return *server_; }
    Prober& prober() { return prober_; }

private:
    lab::Scenario scenario_;
    lab::Pki pki_;
    lab::CertBank bank_;
    std::unique_ptr<lab::Server> server_;
    Dialer dialer_;
    ClientIdentity identity_;
    Prober prober_;
};

}  // namespace

TEST(AccessAmqp, DefaultCredentialsAccepted) {
    LiveServer live(canonical("amqp_default_creds"));
    const auto v = amqp_default_credentials(live.factory(), 2s);
    EXPECT_EQ(v.status, AccessStatus::default_credentials) << v.detail;
}

TEST(AccessAmqp, OtherCredentialsRefuseGuest) {
    LiveServer live(canonical("reuse_intra_as_1"));
    const auto v = amqp_default_credentials(live.factory(), 2s);
    EXPECT_EQ(v.status, AccessStatus::protected_) << v.detail;
    ASSERT_FALSE(v.evidence.empty());
    EXPECT_EQ(v.evidence.front(), 403);
}

TEST(AccessMqtt, OpenBrokerWithoutSubscription) {
    LiveServer live(canonical("mqtt_public_open"));
    const auto v = mqtt_open_access(live.factory(), false, {}, 2s);
    EXPECT_EQ(v.status, AccessStatus::open);
    EXPECT_EQ(v.payload_bytes_read, 0u);
    EXPECT_EQ(v.messages_seen, 0u);
}

TEST(AccessMqtt, ProtectedBroker) {
    LiveServer live(canonical("mqtt_private_auth"));
    const auto v = mqtt_open_access(live.factory(), true, {}, 2s);
    EXPECT_EQ(v.status, AccessStatus::protected_);
    ASSERT_FALSE(v.evidence.empty());
    EXPECT_NE(v.evidence.front(), 0);
}

TEST(AccessMqtt, ByteLimitIsHard) {
    LiveServer live(canonical("mqtt_flood"));
    const SubscriptionLimits limits{10s, 250'000};
    std::size_t sunk = 0;
    const auto v = mqtt_open_access(live.factory(), true, limits, 2s, [&](std::string_view s) { sunk += s.size(); });
    EXPECT_EQ(v.status, AccessStatus::open);
    EXPECT_LE(v.payload_bytes_read, limits.byte_limit);
    EXPECT_GT(v.payload_bytes_read, limits.byte_limit / 2);
    EXPECT_LE(sunk, limits.byte_limit);
    EXPECT_GT(v.messages_seen, 0u);
}

TEST(AccessMqtt, TimeLimitIsHard) {
    auto s = canonical("mqtt_flood");
    LiveServer live(s);
    const SubscriptionLimits limits{300ms, 1'000'000'000};
    const auto t0 = Clock::now();
    const auto v = mqtt_open_access(live.factory(), true, limits, 2s);
    const auto took = Clock::now() - t0;
    EXPECT_EQ(v.status, AccessStatus::open);
    // Loopback delivers the whole flood early; the reader then waits out the window and stops.
    EXPECT_GE(took, 300ms);
    EXPECT_LT(took, 3s);
    EXPECT_LE(v.payload_bytes_read, limits.byte_limit);
}

TEST(AccessHttp, OpenAndLoginPages) {
    {
        LiveServer live(canonical("foxplatform_open"));
        EXPECT_EQ(http_login_check(live.factory(), 2s).status, AccessStatus::open);
    }
    {
        LiveServer live(canonical("foxplatform_login"));
        EXPECT_EQ(http_login_check(live.factory(), 2s).status, AccessStatus::protected_);
    }
}

TEST(AccessHttp, UnreachableIsIndeterminate) {
    const ChannelFactory none = [] { return std::unique_ptr<Channel>{}; };
    EXPECT_EQ(http_login_check(none, 1s).status, AccessStatus::indeterminate);
    EXPECT_EQ(amqp_default_credentials(none, 1s).status, AccessStatus::indeterminate);
    EXPECT_EQ(mqtt_open_access(none, false, {}, 1s).status, AccessStatus::indeterminate);
}

TEST(PasswordField, Detection) {
    EXPECT_TRUE(has_password_field(R"(<form><INPUT name="p" TYPE="Password"></form>)"));
    EXPECT_TRUE(has_password_field("<input type=password>"));
    EXPECT_TRUE(has_password_field("<input class='x' type = 'password' />"));
    EXPECT_FALSE(has_password_field(R"(<input type="text" name="password">)"));
    EXPECT_FALSE(has_password_field("<p>type=password</p>"));
    EXPECT_FALSE(has_password_field(""));
    // Large pages stay cheap and safe.
    std::string big(5'000'000, 'a');
    big += "<input type=\"password\">";
    EXPECT_TRUE(has_password_field(big));
}

TEST(Contacts, ExtractionAndMxFilter) {
    const MxResolver resolver = [](const std::string& d) -> std::optional<bool> {
        if (d == "plant.example") return true;
        if (d == "nomx.example") return false;
        return std::nullopt;
    };
    const auto c = extract_contacts(
        "alarm to Ops.Team@plant.example, cc ops.team@PLANT.example; bounce@nomx.example "
        "noc@unknown.example. not-an-address@ x@y @z.example a@b.c",
        resolver);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c[0].address, "Ops.Team@plant.example");
    EXPECT_TRUE(c[0].mx_verified);
    EXPECT_EQ(c[1].address, "noc@unknown.example");
    EXPECT_FALSE(c[1].mx_verified);
}

TEST(Contacts, HugePayloadIsLinear) {
    std::string text(10'000'000, 'x');
    text.replace(5'000'000, 20, " ops@plant.example ");
    const auto c = extract_contacts(text, [](const std::string&) { return std::optional<bool>(true); });
    ASSERT_EQ(c.size(), 1u);
}

TEST(AccessStatusNames, RoundTrip) {
    for (auto s : {AccessStatus::open, AccessStatus::default_credentials, AccessStatus::protected_,
                   AccessStatus::indeterminate})
        EXPECT_EQ(parse_access_status(to_string(s)), s);
}
