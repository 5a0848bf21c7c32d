#include "hear/ckks/serialize.hpp"

#include <cstring>
#include <fstream>

#include "hear/common.hpp"

namespace hear::ckks {

namespace {

class Writer {
public:
    Writer(const std::string& path, const char* magic, const ParameterSet& ps) : os_(path, std::ios::binary)
    {
        if (!os_) throw ValidationError("cannot open for writing: " + path);
        os_.write(magic, 8);
        put<std::uint32_t>(kFormatVersion);
        put<std::uint64_t>(ps.digest());
    }
    template <class T>
    void put(T v)
    {
        os_.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
    void vec(const std::vector<u64>& v)
    {
        put<std::uint64_t>(v.size());
        os_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(u64)));
    }
    void finish(const std::string& path)
    {
        os_.flush();
        if (!os_) throw ValidationError("write failed: " + path);
    }

private:
    std::ofstream os_;
};

class Reader {
public:
    Reader(const std::string& path, const char* magic, const ParameterSet& ps) : is_(path, std::ios::binary), path_(path)
    {
        if (!is_) throw ValidationError("cannot open: " + path);
        char m[8];
        is_.read(m, 8);
        if (!is_ || std::memcmp(m, magic, 8) != 0) throw ValidationError("not a " + std::string(magic, 8) + " file: " + path);
        if (get<std::uint32_t>() != kFormatVersion) throw ValidationError("unsupported format version: " + path);
        if (get<std::uint64_t>() != ps.digest()) throw CryptoError("parameter digest mismatch: " + path);
    }
    template <class T>
    T get()
    {
        T v{};
        is_.read(reinterpret_cast<char*>(&v), sizeof v);
        if (!is_) throw ValidationError("truncated file: " + path_);
        return v;
    }
    std::vector<u64> vec(std::size_t limit)
    {
        const auto n = get<std::uint64_t>();
        if (n > limit) throw ValidationError("corrupt length field: " + path_);
        std::vector<u64> v(n);
        is_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(u64)));
        if (!is_) throw ValidationError("truncated file: " + path_);
        return v;
    }

private:
    std::ifstream is_;
    std::string path_;
};

std::size_t max_len(const ParameterSet& ps) { return static_cast<std::size_t>(ps.max_level() + 2) * ps.n(); }

void write_ksw(Writer& w, const KswKey& k)
{
    w.put<std::int32_t>(k.max_level);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(k.b.size()));
    for (std::size_t i = 0; i < k.b.size(); ++i) {
        w.vec(k.b[i]);
        w.vec(k.a[i]);
    }
}

KswKey read_ksw(Reader& r, const ParameterSet& ps)
{
    KswKey k;
    k.max_level = r.get<std::int32_t>();
    const auto digits = r.get<std::uint32_t>();
    if (k.max_level > ps.max_level() || digits != static_cast<std::uint32_t>(k.max_level + 1))
        throw ValidationError("corrupt key-switching key");
    for (std::uint32_t i = 0; i < digits; ++i) {
        k.b.push_back(r.vec(max_len(ps)));
        k.a.push_back(r.vec(max_len(ps)));
    }
    return k;
}

}  // namespace

void save_secret_key(const std::string& path, const SecretKey& sk, const ParameterSet& ps)
{
    Writer w(path, "HEARSK01", ps);
    w.vec(sk.s);
    w.finish(path);
}

void save_public_key(const std::string& path, const PublicKey& pk, const ParameterSet& ps)
{
    Writer w(path, "HEARPK01", ps);
    w.vec(pk.b);
    w.vec(pk.a);
    w.finish(path);
}

void save_eval_keys(const std::string& path, const EvalKeys& ek, const ParameterSet& ps)
{
    Writer w(path, "HEAREK01", ps);
    write_ksw(w, ek.relin);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ek.galois.size()));
    for (const auto& [amount, key] : ek.galois) {
        w.put<std::int32_t>(amount);
        write_ksw(w, key);
    }
    w.finish(path);
}

void save_ciphertext(const std::string& path, const Ciphertext& ct, const ParameterSet& ps)
{
    Writer w(path, "HEARCT01", ps);
    w.put<std::int32_t>(ct.level_);
    w.put<double>(ct.scale_);
    w.vec(ct.c0);
    w.vec(ct.c1);
    w.finish(path);
}

SecretKey load_secret_key(const std::string& path, const ParameterSet& ps)
{
    Reader r(path, "HEARSK01", ps);
    SecretKey sk{r.vec(max_len(ps))};
    if (sk.s.size() != max_len(ps)) throw ValidationError("corrupt secret key");
    return sk;
}

PublicKey load_public_key(const std::string& path, const ParameterSet& ps)
{
    Reader r(path, "HEARPK01", ps);
    PublicKey pk;
    pk.b = r.vec(max_len(ps));
    pk.a = r.vec(max_len(ps));
    const std::size_t want = static_cast<std::size_t>(ps.max_level() + 1) * ps.n();
    if (pk.b.size() != want || pk.a.size() != want) throw ValidationError("corrupt public key");
    return pk;
}

EvalKeys load_eval_keys(const std::string& path, const ParameterSet& ps)
{
    Reader r(path, "HEAREK01", ps);
    EvalKeys ek;
    ek.relin = read_ksw(r, ps);
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto amount = r.get<std::int32_t>();
        ek.galois[amount] = read_ksw(r, ps);
    }
    return ek;
}

Ciphertext load_ciphertext(const std::string& path, const ParameterSet& ps)
{
    Reader r(path, "HEARCT01", ps);
    Ciphertext ct;
    ct.level_ = r.get<std::int32_t>();
    ct.scale_ = r.get<double>();
    if (ct.level_ < 0 || ct.level_ > ps.max_level()) throw ValidationError("corrupt ciphertext level");
    ct.c0 = r.vec(max_len(ps));
    ct.c1 = r.vec(max_len(ps));
    const std::size_t want = static_cast<std::size_t>(ct.level_ + 1) * ps.n();
    if (ct.c0.size() != want || ct.c1.size() != want) throw ValidationError("corrupt ciphertext");
    return ct;
}

struct PlaintextWriter::Impl {
    Writer w;
    Impl(const std::string& path, const ParameterSet& ps) : w(path, "HEARPT01", ps) {}
};

PlaintextWriter::PlaintextWriter(const std::string& path, const ParameterSet& ps)
    : impl_(std::make_unique<Impl>(path, ps)), path_(path)
{
}

PlaintextWriter::~PlaintextWriter() = default;

void PlaintextWriter::write(const Plaintext& pt)
{
    if (!impl_) throw ValidationError("plaintext container already closed: " + path_);
    impl_->w.put<std::int32_t>(pt.level);
    impl_->w.put<double>(pt.scale);
    impl_->w.vec(pt.data);
    ++count_;
}

void PlaintextWriter::close()
{
    if (!impl_) return;
    impl_->w.put<std::int32_t>(-1);
    impl_->w.finish(path_);
    impl_.reset();
}

std::vector<Plaintext> load_plaintexts(const std::string& path, const ParameterSet& ps)
{
    Reader r(path, "HEARPT01", ps);
    std::vector<Plaintext> out;
    for (;;) {
        Plaintext pt;
        pt.level = r.get<std::int32_t>();
        if (pt.level == -1) break;
        if (pt.level < 0 || pt.level > ps.max_level()) throw ValidationError("corrupt plaintext level");
        pt.scale = r.get<double>();
        pt.data = r.vec(max_len(ps));
        if (pt.data.size() != static_cast<std::size_t>(pt.level + 1) * ps.n()) throw ValidationError("corrupt plaintext");
        out.push_back(std::move(pt));
    }
    return out;
}

void save_params(const std::string& path, const ParameterSet& ps)
{
    std::ofstream os(path);
    if (!os) throw ValidationError("cannot open for writing: " + path);
    os << ps.to_json().dump(2) << "\n";
}

ParameterSet load_params(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open: " + path);
    try {
        return ParameterSet::from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed parameter file: ") + e.what());
    }
}

}  // namespace hear::ckks
