#include "iiot/x509.hpp"

#include <openssl/pem.h>
#include <openssl/rsa.h>
#include <openssl/x509v3.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "ossl.hpp"

namespace iiot {
namespace {

using namespace std::chrono;

std::string name_to_string(const X509_NAME* name) {
    ossl::BioPtr bio(BIO_new(BIO_s_mem()));
    X509_NAME_print_ex(bio.get(), name, 0, XN_FLAG_RFC2253 & ~ASN1_STRFLGS_ESC_MSB);
    char* data = nullptr;
    long len = BIO_get_mem_data(bio.get(), &data);
    return std::string(data, static_cast<std::size_t>(len));
}

std::string name_entry(const X509_NAME* name, int nid) {
    int idx = X509_NAME_get_index_by_NID(name, nid, -1);
    if (idx < 0) return {};
    const ASN1_STRING* s = X509_NAME_ENTRY_get_data(X509_NAME_get_entry(name, idx));
    unsigned char* utf8 = nullptr;
    int len = ASN1_STRING_to_UTF8(&utf8, s);
    if (len < 0) return {};
    std::string out(reinterpret_cast<char*>(utf8), static_cast<std::size_t>(len));
    OPENSSL_free(utf8);
    return out;
}

TimePoint asn1_to_time(const ASN1_TIME* t) {
    std::tm tm{};
    if (ASN1_TIME_to_tm(t, &tm) != 1) throw AuditError("unparsable certificate time");
    const year_month_day ymd{year{tm.tm_year + 1900}, month{static_cast<unsigned>(tm.tm_mon + 1)},
                             day{static_cast<unsigned>(tm.tm_mday)}};
    return sys_days{ymd} + hours{tm.tm_hour} + minutes{tm.tm_min} + seconds{tm.tm_sec};
}

SigHash hash_from_nid(int md_nid) {
    switch (md_nid) {
        case NID_md5: return SigHash::MD5;
        case NID_sha1: return SigHash::SHA1;
        case NID_sha256: return SigHash::SHA256;
        case NID_sha384: return SigHash::SHA384;
        case NID_sha512: return SigHash::SHA512;
        default: return SigHash::other;
    }
}

const EVP_MD* md_for(SigHash h) {
    switch (h) {
        case SigHash::MD5: return EVP_md5();
        case SigHash::SHA1: return EVP_sha1();
        case SigHash::SHA256: return EVP_sha256();
        case SigHash::SHA384: return EVP_sha384();
        case SigHash::SHA512: return EVP_sha512();
        case SigHash::other: break;
    }
    throw AuditError("unsupported signature hash");
}

std::string key_usage_names(X509* x) {
    const std::uint32_t ku = X509_get_key_usage(x);
    if (ku == UINT32_MAX) return {};
    static constexpr std::pair<std::uint32_t, const char*> names[] = {
        {KU_DIGITAL_SIGNATURE, "digitalSignature"}, {KU_NON_REPUDIATION, "nonRepudiation"},
        {KU_KEY_ENCIPHERMENT, "keyEncipherment"},   {KU_DATA_ENCIPHERMENT, "dataEncipherment"},
        {KU_KEY_AGREEMENT, "keyAgreement"},         {KU_KEY_CERT_SIGN, "keyCertSign"},
        {KU_CRL_SIGN, "cRLSign"},                   {KU_ENCIPHER_ONLY, "encipherOnly"},
        {KU_DECIPHER_ONLY, "decipherOnly"},
    };
    std::string out;
    for (auto [bit, name] : names) {
        if (!(ku & bit)) continue;
        if (!out.empty()) out += ',';
        out += name;
    }
    return out;
}

void add_ext(X509* cert, X509* issuer, int nid, const char* value) {
    X509V3_CTX ctx;
    X509V3_set_ctx_nodb(&ctx);
    X509V3_set_ctx(&ctx, issuer, cert, nullptr, nullptr, 0);
    X509_EXTENSION* ext = X509V3_EXT_conf_nid(nullptr, &ctx, nid, value);
    if (!ext) ossl::fail("X509V3_EXT_conf_nid");
    X509_add_ext(cert, ext, -1);
    X509_EXTENSION_free(ext);
}

}  // namespace

std::string_view to_string(KeyType k) {
    switch (k) {
        case KeyType::RSA: return "RSA";
        case KeyType::ECDSA: return "ECDSA";
        case KeyType::other: return "other";
    }
    return "other";
}

std::string_view to_string(SigHash h) {
    switch (h) {
        case SigHash::MD5: return "MD5";
        case SigHash::SHA1: return "SHA1";
        case SigHash::SHA256: return "SHA256";
        case SigHash::SHA384: return "SHA384";
        case SigHash::SHA512: return "SHA512";
        case SigHash::other: return "other";
    }
    return "other";
}

std::string format_time(TimePoint t) {
    const auto dp = floor<days>(t);
    const year_month_day ymd{dp};
    const hh_mm_ss hms{t - dp};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

TimePoint parse_time(std::string_view iso) {
    int y = 0, h = 0, mi = 0, s = 0;
    unsigned mo = 0, d = 0;
    const std::string str(iso);
    int n = std::sscanf(str.c_str(), "%d-%u-%uT%d:%d:%d", &y, &mo, &d, &h, &mi, &s);
    if (n != 3 && n != 6) throw AuditError("invalid timestamp: " + str);
    const year_month_day ymd{year{y}, month{mo}, day{d}};
    if (!ymd.ok()) throw AuditError("invalid date: " + str);
    return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

CertificateRecord parse_certificate(ByteView der) {
    auto x = ossl::x509_from_der(der);
    if (!x) throw AuditError("certificate does not parse as DER X.509");
    CertificateRecord r;
    r.der.assign(der.begin(), der.end());
    r.fingerprint = sha256_hex(der);
    r.subject = name_to_string(X509_get_subject_name(x.get()));
    r.issuer = name_to_string(X509_get_issuer_name(x.get()));
    r.common_name = name_entry(X509_get_subject_name(x.get()), NID_commonName);
    r.organization = name_entry(X509_get_subject_name(x.get()), NID_organizationName);
    r.not_before = asn1_to_time(X509_get0_notBefore(x.get()));
    r.not_after = asn1_to_time(X509_get0_notAfter(x.get()));

    if (EVP_PKEY* pk = X509_get0_pubkey(x.get())) {
        switch (EVP_PKEY_get_base_id(pk)) {
            case EVP_PKEY_RSA:
            case EVP_PKEY_RSA_PSS: r.key_type = KeyType::RSA; break;
            case EVP_PKEY_EC: r.key_type = KeyType::ECDSA; break;
            default: r.key_type = KeyType::other;
        }
        r.key_bits = EVP_PKEY_get_bits(pk);
    }
    ERR_clear_error();

    const int sig_nid = X509_get_signature_nid(x.get());
    r.sig_algorithm = OBJ_nid2ln(sig_nid) ? OBJ_nid2ln(sig_nid) : "unknown";
    int md_nid = NID_undef, pk_nid = NID_undef;
    if (OBJ_find_sigid_algs(sig_nid, &md_nid, &pk_nid)) r.sig_hash = hash_from_nid(md_nid);
    r.key_usage = key_usage_names(x.get());
    return r;
}

// Trust stores

struct TrustStores::Impl {
    std::map<std::string, ossl::StorePtr> stores;
    std::map<std::string, std::size_t> counts;

    X509_STORE* get(const std::string& name) {
        auto& s = stores[name];
        if (!s) s.reset(X509_STORE_new());
        return s.get();
    }
};

TrustStores::TrustStores() : impl_(std::make_unique<Impl>()) {}
TrustStores::~TrustStores() = default;
TrustStores::TrustStores(TrustStores&&) noexcept = default;
TrustStores& TrustStores::operator=(TrustStores&&) noexcept = default;

const std::vector<std::string>& TrustStores::known_names() {
    static const std::vector<std::string> names = {"apple",   "windows", "android", "openjdk",
                                                   "nss",     "oracle",  "lab"};
    return names;
}

TrustStores TrustStores::load_dir(const std::filesystem::path& dir) {
    TrustStores ts;
    for (const auto& name : known_names()) {
        auto path = dir / (name + ".pem");
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        std::stringstream ss;
        ss << in.rdbuf();
        ts.add_pem(name, ss.str());
    }
    return ts;
}

void TrustStores::add_pem(const std::string& store, std::string_view pem) {
    for (const auto& der : pem_to_ders(pem)) add_der(store, der);
    impl_->get(store);
}

void TrustStores::add_der(const std::string& store, ByteView der) {
    auto x = ossl::x509_from_der(der);
    if (!x) throw AuditError("trust store " + store + ": certificate does not parse");
    if (X509_STORE_add_cert(impl_->get(store), x.get()) != 1) {
        ERR_clear_error();  // duplicates are harmless
        return;
    }
    ++impl_->counts[store];
}

std::optional<std::string> TrustStores::validating_store(const std::vector<Bytes>& chain) const {
    if (chain.empty()) return std::nullopt;
    auto leaf = ossl::x509_from_der(chain.front());
    if (!leaf) return std::nullopt;
    std::unique_ptr<STACK_OF(X509), decltype([](STACK_OF(X509)* s) { sk_X509_pop_free(s, X509_free); })>
        untrusted(sk_X509_new_null());
    for (std::size_t i = 1; i < chain.size(); ++i)
        if (auto x = ossl::x509_from_der(chain[i])) sk_X509_push(untrusted.get(), x.release());

    for (const auto& name : names()) {
        X509_STORE* store = impl_->stores.at(name).get();
        ossl::StoreCtxPtr ctx(X509_STORE_CTX_new());
        if (X509_STORE_CTX_init(ctx.get(), store, leaf.get(), untrusted.get()) != 1) continue;
        X509_VERIFY_PARAM* param = X509_STORE_CTX_get0_param(ctx.get());
        X509_VERIFY_PARAM_set_flags(param, X509_V_FLAG_NO_CHECK_TIME);
        X509_VERIFY_PARAM_set_auth_level(param, 0);
        const bool ok = X509_verify_cert(ctx.get()) == 1;
        ERR_clear_error();
        if (ok) return name;
    }
    return std::nullopt;
}

std::vector<std::string> TrustStores::names() const {
    std::vector<std::string> out;
    // Known slots first in their canonical order, then anything else.
    for (const auto& n : known_names())
        if (impl_->stores.contains(n)) out.push_back(n);
    for (const auto& [n, _] : impl_->stores)
        if (std::find(out.begin(), out.end(), n) == out.end()) out.push_back(n);
    return out;
}

std::size_t TrustStores::root_count(const std::string& store) const {
    auto it = impl_->counts.find(store);
    return it == impl_->counts.end() ? 0 : it->second;
}

// Keys and issuance

struct PrivateKey::Impl {
    ossl::PkeyPtr key;
};

PrivateKey::PrivateKey() : impl_(std::make_unique<Impl>()) {}
PrivateKey::~PrivateKey() = default;
PrivateKey::PrivateKey(PrivateKey&&) noexcept = default;
PrivateKey& PrivateKey::operator=(PrivateKey&&) noexcept = default;

PrivateKey PrivateKey::generate(const KeySpec& spec) {
    PrivateKey k;
    if (spec.type == KeyType::RSA) {
        k.impl_->key.reset(EVP_RSA_gen(static_cast<unsigned>(spec.bits)));
    } else if (spec.type == KeyType::ECDSA) {
        const char* curve = spec.bits <= 256 ? "P-256" : spec.bits <= 384 ? "P-384" : "P-521";
        k.impl_->key.reset(EVP_EC_gen(curve));
    } else {
        throw AuditError("cannot generate key of type other");
    }
    if (!k.impl_->key) ossl::fail("key generation");
    return k;
}

PrivateKey PrivateKey::from_pem(std::string_view pem) {
    ossl::BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    PrivateKey k;
    k.impl_->key.reset(PEM_read_bio_PrivateKey(bio.get(), nullptr, nullptr, nullptr));
    if (!k.impl_->key) ossl::fail("PEM_read_bio_PrivateKey");
    return k;
}

std::string PrivateKey::to_pem() const {
    ossl::BioPtr bio(BIO_new(BIO_s_mem()));
    if (PEM_write_bio_PrivateKey(bio.get(), impl_->key.get(), nullptr, nullptr, 0, nullptr, nullptr) != 1)
        ossl::fail("PEM_write_bio_PrivateKey");
    char* data = nullptr;
    long len = BIO_get_mem_data(bio.get(), &data);
    return std::string(data, static_cast<std::size_t>(len));
}

void* PrivateKey::native() const { return impl_->key.get(); }

IssuedCert issue_certificate(const CertSpec& spec, const PrivateKey& subject_key, const IssuedCert* issuer,
                             const PrivateKey* issuer_key) {
    if ((issuer == nullptr) != (issuer_key == nullptr))
        throw AuditError("issuer certificate and key must be given together");
    ossl::X509Ptr x(X509_new());
    X509_set_version(x.get(), 2);
    ASN1_INTEGER_set_uint64(X509_get_serialNumber(x.get()), spec.serial);
    const auto nb = spec.not_before.time_since_epoch().count();
    const auto na = nb + spec.lifetime.count();
    ASN1_TIME_set(X509_getm_notBefore(x.get()), static_cast<time_t>(nb));
    ASN1_TIME_set(X509_getm_notAfter(x.get()), static_cast<time_t>(na));

    X509_NAME* name = X509_get_subject_name(x.get());
    auto add_entry = [&](const char* field, const std::string& value) {
        if (value.empty()) return;
        X509_NAME_add_entry_by_txt(name, field, MBSTRING_UTF8,
                                   reinterpret_cast<const unsigned char*>(value.data()),
                                   static_cast<int>(value.size()), -1, 0);
    };
    add_entry("O", spec.organization);
    add_entry("CN", spec.common_name);

    auto* pkey = static_cast<EVP_PKEY*>(subject_key.native());
    X509_set_pubkey(x.get(), pkey);

    ossl::X509Ptr issuer_x;
    if (issuer) {
        issuer_x = ossl::x509_from_der(issuer->der);
        if (!issuer_x) throw AuditError("issuer certificate does not parse");
        X509_set_issuer_name(x.get(), X509_get_subject_name(issuer_x.get()));
    } else {
        X509_set_issuer_name(x.get(), name);
    }
    X509* ext_issuer = issuer_x ? issuer_x.get() : x.get();
    add_ext(x.get(), ext_issuer, NID_basic_constraints, spec.ca ? "critical,CA:TRUE" : "CA:FALSE");
    add_ext(x.get(), ext_issuer, NID_subject_key_identifier, "hash");
    if (issuer_x) add_ext(x.get(), ext_issuer, NID_authority_key_identifier, "keyid:always");
    add_ext(x.get(), ext_issuer, NID_key_usage,
            spec.ca ? "critical,keyCertSign,cRLSign,digitalSignature"
                    : "critical,digitalSignature,keyEncipherment");

    auto* signer = static_cast<EVP_PKEY*>(issuer_key ? issuer_key->native() : subject_key.native());
    if (X509_sign(x.get(), signer, md_for(spec.sig_hash)) <= 0) ossl::fail("X509_sign");
    return IssuedCert{ossl::x509_to_der(x.get())};
}

std::string IssuedCert::pem() const { return der_to_pem(der); }

std::string der_to_pem(ByteView der) {
    auto x = ossl::x509_from_der(der);
    if (!x) throw AuditError("certificate does not parse");
    ossl::BioPtr bio(BIO_new(BIO_s_mem()));
    PEM_write_bio_X509(bio.get(), x.get());
    char* data = nullptr;
    long len = BIO_get_mem_data(bio.get(), &data);
    return std::string(data, static_cast<std::size_t>(len));
}

std::vector<Bytes> pem_to_ders(std::string_view pem) {
    std::vector<Bytes> out;
    ossl::BioPtr bio(BIO_new_mem_buf(pem.data(), static_cast<int>(pem.size())));
    while (X509* x = PEM_read_bio_X509(bio.get(), nullptr, nullptr, nullptr)) {
        ossl::X509Ptr owned(x);
        out.push_back(ossl::x509_to_der(x));
    }
    ERR_clear_error();  // end-of-input is reported as an error
    return out;
}

ClientIdentity ClientIdentity::create(const std::string& contact_url) {
    auto key = PrivateKey::generate({KeyType::RSA, 2048});
    CertSpec spec;
    spec.common_name = contact_url;
    spec.organization = "IIoT TLS audit";
    spec.not_before = floor<seconds>(system_clock::now()) - days{1};
    spec.lifetime = days{825};
    return ClientIdentity{issue_certificate(spec, key), key.to_pem()};
}

ClientIdentity ClientIdentity::load_or_create(const std::filesystem::path& dir, const std::string& contact_url) {
    const auto cert_path = dir / "client-cert.pem";
    const auto key_path = dir / "client-key.pem";
    if (std::filesystem::exists(cert_path) && std::filesystem::exists(key_path)) {
        std::ifstream c(cert_path), k(key_path);
        std::stringstream cs, ks;
        cs << c.rdbuf();
        ks << k.rdbuf();
        auto ders = pem_to_ders(cs.str());
        if (!ders.empty()) {
            auto rec = parse_certificate(ders.front());
            if (rec.common_name == contact_url) return ClientIdentity{IssuedCert{ders.front()}, ks.str()};
        }
    }
    auto id = create(contact_url);
    std::filesystem::create_directories(dir);
    std::ofstream(cert_path) << id.cert.pem();
    {
        std::ofstream k(key_path);
        k << id.key_pem;
    }
    std::filesystem::permissions(key_path, std::filesystem::perms::owner_read | std::filesystem::perms::owner_write);
    return id;
}

}  // namespace iiot
