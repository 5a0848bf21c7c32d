#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "hear/ckks/backend.hpp"
#include "hear/ckks/engine.hpp"
#include "hear/ckks/serialize.hpp"

using namespace hear;
using namespace hear::ckks;

namespace {

double max_err(const std::vector<double>& a, const std::vector<double>& b)
{
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, std::abs(a[i] - b[i]));
    return e;
}

std::vector<double> random_slots(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0)
{
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(g);
    return v;
}

}  // namespace

TEST_CASE("barrett reduction matches 128-bit remainder")
{
    std::mt19937_64 g(7);
    for (u64 p : ntt_primes(35, 3, 1 << 15)) {
        Modulus m(p);
        for (int i = 0; i < 2000; ++i) {
            const u128 x = (static_cast<u128>(g() >> 4) << 64) | g();
            CHECK(m.reduce128(x) == static_cast<u64>(x % p));
        }
    }
}

TEST_CASE("ntt primes are prime and 1 mod 2N")
{
    auto ps = ntt_primes(31, 4, 1 << 15);
    for (u64 p : ps) {
        CHECK(is_prime(p));
        CHECK(p % (1 << 15) == 1);
        CHECK(p < (u64{1} << 31));
    }
}

TEST_CASE("negacyclic ntt agrees with schoolbook product at N=16")
{
    const ParameterSet ps = gen_params("fast-hear");
    std::vector<u64> all = ps.primes;
    all.push_back(ps.special);
    std::mt19937_64 g(3);
    for (u64 p : all) {
        // The chain primes are 1 mod 2^15, hence also 1 mod 32.
        NttTables t(p, 4);
        const Modulus& m = t.mod();
        std::vector<u64> a(16), b(16), ref(16, 0);
        for (int i = 0; i < 16; ++i) {
            a[i] = g() % p;
            b[i] = g() % p;
        }
        for (int i = 0; i < 16; ++i)
            for (int j = 0; j < 16; ++j) {
                const u64 prod = m.mul(a[i], b[j]);
                if (i + j < 16) ref[i + j] = m.add(ref[i + j], prod);
                else ref[i + j - 16] = m.sub(ref[i + j - 16], prod);
            }
        // Evaluation-point ordering.
        std::vector<u64> fa = a;
        t.forward(fa.data());
        for (int i = 0; i < 16; ++i) {
            const u64 pt = m.pow(t.psi(), 2 * bit_reverse(i, 4) + 1);
            u64 ev = 0;
            for (int k = 15; k >= 0; --k) ev = m.add(m.mul(ev, pt), a[k]);
            CHECK(fa[i] == ev);
        }
        std::vector<u64> fb = b;
        t.forward(fb.data());
        for (int i = 0; i < 16; ++i) fa[i] = m.mul(fa[i], fb[i]);
        t.inverse(fa.data());
        CHECK(fa == ref);
    }
}

TEST_CASE("encode/decode round trip")
{
    auto ctx = std::make_shared<Context>(gen_params("toy"));
    Encoder enc(*ctx);
    auto v = random_slots(ctx->slots(), 1);
    Plaintext pt = enc.encode(v, 0, std::ldexp(1.0, 30));
    std::vector<u64> c(pt.data.begin(), pt.data.begin() + ctx->n());
    ctx->ntt(0).inverse(c.data());
    std::vector<double> coeffs(ctx->n());
    for (int i = 0; i < ctx->n(); ++i) coeffs[i] = static_cast<double>(ctx->mod(0).centered(c[i]));
    CHECK(max_err(enc.decode(coeffs, pt.scale), v) < 1e-7);
}

TEST_CASE("toy engine: encrypt, mult, rotate, rescale")
{
    auto ctx = std::make_shared<Context>(gen_params("toy"));
    const int L = ctx->max_level();
    auto be = CkksBackend::generate(ctx, {{1, L}, {5, L}, {-3, 4}}, 42);
    const double delta = std::ldexp(1.0, 31);
    auto x = random_slots(ctx->slots(), 2);
    auto y = random_slots(ctx->slots(), 3);
    auto cx = be.encrypt(x, L, delta);
    CHECK(max_err(be.decrypt(cx), x) < 1e-4);

    auto cy = be.encrypt(y, L, delta);
    auto prod = be.rescale(be.mult(cx, cy));
    CHECK(prod.level() == L - 1);
    std::vector<double> ref(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) ref[i] = x[i] * y[i];
    CHECK(max_err(be.decrypt(prod), ref) < 1e-4);

    int ks[] = {0, 1, 5};
    auto rs = be.rot_many(cx, ks);
    for (int j = 0; j < 3; ++j) {
        std::vector<double> r(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[(i + ks[j]) % x.size()];
        CHECK(max_err(be.decrypt(rs[j]), r) < 1e-4);
    }
    CHECK_THROWS_AS(be.rot(cx, 2), CryptoError);
    CHECK_THROWS_AS(be.rot(cx, -3), CryptoError);
    auto low = be.mod_down(cx, 4);
    auto r3 = be.rot(low, -3);
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = x[(i + x.size() - 3) % x.size()];
    CHECK(max_err(be.decrypt(r3), r) < 1e-4);
}

TEST_CASE("hoisted rotations equal single rotations")
{
    auto ctx = std::make_shared<Context>(gen_params("toy"));
    const int L = ctx->max_level();
    std::map<int, int> keys;
    for (int k : {1, 2, 7, 64, -1, -16}) keys[k] = L;
    auto be = CkksBackend::generate(ctx, keys, 9);
    const auto x = random_slots(ctx->slots(), 4);
    const auto cx = be.encrypt(x, L, std::ldexp(1.0, 31));
    const int ks[] = {1, 2, 7, 64, -1, -16};
    const auto many = be.rot_many(cx, ks);
    for (int j = 0; j < 6; ++j) {
        const auto single = be.rot(cx, ks[j]);
        CHECK(max_err(be.decrypt(many[j]), be.decrypt(single)) < 1e-6);
    }
    CHECK(be.counters().total().hoisted_groups == 1);
    CHECK(be.counters().total().hoisted_total == 6);
    CHECK(be.counters().total().rot == 6);
    CHECK(missing_rotations(*ctx, *std::make_shared<EvalKeys>(), {{3, L}}) == std::vector<int>{3});
}

TEST_CASE("keys, ciphertexts and plaintexts round-trip through files")
{
    const ParameterSet ps = gen_params("toy");
    auto ctx = std::make_shared<Context>(ps);
    const auto dir = std::filesystem::temp_directory_path() / "hear_test_ckks";
    std::filesystem::create_directories(dir);
    auto path = [&](const char* f) { return (dir / f).string(); };

    KeyGenerator kg(*ctx, 5);
    const SecretKey sk = kg.secret_key();
    const PublicKey pk = kg.public_key(sk);
    const EvalKeys ek = make_eval_keys(*ctx, kg, sk, {{1, 3}, {-2, ps.max_level()}});
    save_params(path("params.json"), ps);
    save_secret_key(path("sk.bin"), sk, ps);
    save_public_key(path("pk.bin"), pk, ps);
    save_eval_keys(path("ek.bin"), ek, ps);

    CHECK(load_params(path("params.json")).digest() == ps.digest());
    CHECK(load_secret_key(path("sk.bin"), ps).s == sk.s);
    const PublicKey pk2 = load_public_key(path("pk.bin"), ps);
    CHECK(pk2.a == pk.a);
    CHECK(pk2.b == pk.b);
    const EvalKeys ek2 = load_eval_keys(path("ek.bin"), ps);
    CHECK(ek2.bytes() == ek.bytes());
    REQUIRE(ek2.galois.size() == ek.galois.size());
    for (const auto& [k, key] : ek.galois) {
        CHECK(ek2.galois.at(k).max_level == key.max_level);
        CHECK(ek2.galois.at(k).b == key.b);
    }
    CHECK(ek2.relin.a == ek.relin.a);

    CkksBackend be(ctx, std::make_shared<const EvalKeys>(ek2), load_secret_key(path("sk.bin"), ps), pk2, 6);
    const auto x = random_slots(ctx->slots(), 7);
    const auto ct = be.encrypt(x, 4, std::ldexp(1.0, 31));
    save_ciphertext(path("ct.bin"), ct, ps);
    const Ciphertext back = load_ciphertext(path("ct.bin"), ps);
    CHECK(back.level() == 4);
    CHECK(back.scale() == ct.scale());
    CHECK(back.c0 == ct.c0);
    CHECK(back.c1 == ct.c1);
    CHECK_THROWS_AS(be.rot(back, 1), CryptoError);  // key only reaches level 3
    CHECK(max_err(be.decrypt(be.rot(back, -2)), be.decrypt(be.rot(ct, -2))) == 0.0);

    {
        PlaintextWriter w(path("pts.bin"), ps);
        for (int l : {0, 3, ps.max_level()}) w.write(be.encoder().encode(x, l, std::ldexp(1.0, 30)));
        CHECK(w.count() == 3);
        w.close();
    }
    const auto pts = load_plaintexts(path("pts.bin"), ps);
    REQUIRE(pts.size() == 3);
    CHECK(pts[1].level == 3);
    CHECK(pts[1].data == be.encoder().encode(x, 3, std::ldexp(1.0, 30)).data);
    CHECK(pts[2].data.size() == static_cast<std::size_t>(ps.max_level() + 1) * ps.n());

    // wrong parameters, wrong kind, truncation
    const ParameterSet other = gen_params("toy-hear");
    CHECK_THROWS_AS(load_ciphertext(path("ct.bin"), other), CryptoError);
    CHECK_THROWS_AS(load_eval_keys(path("ek.bin"), other), CryptoError);
    CHECK_THROWS_AS(load_ciphertext(path("sk.bin"), ps), ValidationError);
    std::filesystem::resize_file(path("ct.bin"), std::filesystem::file_size(path("ct.bin")) / 2);
    CHECK_THROWS_AS(load_ciphertext(path("ct.bin"), ps), ValidationError);
    CHECK_THROWS_AS(load_ciphertext(path("none.bin"), ps), ValidationError);
    std::filesystem::remove_all(dir);
}
