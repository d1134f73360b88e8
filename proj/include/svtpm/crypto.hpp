// Copyright 2026 the svtpm-sim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/param_build.h>
#include <openssl/rand.h>
#include <openssl/rsa.h>
#include <openssl/x509.h>

#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

#include "svtpm/bytes.hpp"
#include "svtpm/result.hpp"

namespace svtpm {

// ---------------------------------------------------------------------------
// Hashing / MACs / KDF
// ---------------------------------------------------------------------------

inline Digest sha256(ByteView data) {
  Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
             nullptr);
  return out;
}

inline Digest sha256_concat(ByteView a, ByteView b) {
  Bytes joined = a + b;
  return sha256(joined);
}

inline Digest hmac_sha256(ByteView key, ByteView data) {
  Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
       data.size(), out.data(), &len);
  return out;
}

// RFC 5869 HKDF, written out over HMAC so the derivation stays auditable
// against the RFC test vectors.
inline Digest hkdf_extract(ByteView salt, ByteView ikm) {
  return hmac_sha256(salt, ikm);
}

inline Bytes hkdf_expand(const Digest& prk, ByteView info, size_t out_len) {
  Bytes out;
  out.reserve(out_len);
  Bytes t;
  uint8_t counter = 1;
  while (out.size() < out_len) {
    Bytes block = t;
    block.insert(block.end(), info.begin(), info.end());
    block.push_back(counter++);
    Digest d = hmac_sha256(view(prk), block);
    t.assign(d.begin(), d.end());
    size_t need = std::min<size_t>(32, out_len - out.size());
    out.insert(out.end(), t.begin(), t.begin() + need);
  }
  return out;
}

inline Bytes hkdf(ByteView salt, ByteView ikm, ByteView info, size_t out_len) {
  return hkdf_expand(hkdf_extract(salt, ikm), info, out_len);
}

inline std::array<uint8_t, 32> hkdf_key32(ByteView salt, ByteView ikm,
                                          ByteView info) {
  Bytes k = hkdf(salt, ikm, info, 32);
  std::array<uint8_t, 32> out{};
  std::memcpy(out.data(), k.data(), 32);
  return out;
}

inline bool const_time_eq(ByteView a, ByteView b) {
  if (a.size() != b.size()) return false;
  return CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

// ---------------------------------------------------------------------------
// Deterministic byte generator. Seeded instances replay identically, which
// is what makes scripted scenarios and the oracle suite reproducible.
// ---------------------------------------------------------------------------

class Drbg {
 public:
  explicit Drbg(ByteView seed) : key_(sha256(seed)) {}

  static Drbg from_os() {
    Bytes seed(32);
    RAND_bytes(seed.data(), static_cast<int>(seed.size()));
    return Drbg(seed);
  }

  static Drbg from_seed_u64(uint64_t seed) {
    ByteWriter w;
    w.u64(seed);
    return Drbg(w.bytes());
  }

  Bytes bytes(size_t n) {
    Bytes out;
    out.reserve(n);
    while (out.size() < n) {
      ByteWriter w;
      w.u64(counter_++);
      Digest block = hmac_sha256(view(key_), w.bytes());
      size_t need = std::min<size_t>(32, n - out.size());
      out.insert(out.end(), block.begin(), block.begin() + need);
    }
    return out;
  }

  template <size_t N>
  std::array<uint8_t, N> arr() {
    Bytes b = bytes(N);
    std::array<uint8_t, N> out{};
    std::memcpy(out.data(), b.data(), N);
    return out;
  }

  uint64_t next_u64() {
    Bytes b = bytes(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | b[i];
    return v;
  }

  // Forks an independent generator; used to hand sub-systems their own
  // streams without coupling their draw counts.
  Drbg fork(ByteView label) {
    Bytes seed = bytes(32);
    seed.insert(seed.end(), label.begin(), label.end());
    return Drbg(seed);
  }

 private:
  Digest key_;
  uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// AEAD (AES-256-GCM) and AES-256-CBC
// ---------------------------------------------------------------------------

struct AeadSealed {
  Bytes ciphertext;
  std::array<uint8_t, 16> tag;
};

inline AeadSealed aes256gcm_seal(const std::array<uint8_t, 32>& key,
                                 const std::array<uint8_t, 12>& nonce,
                                 ByteView aad, ByteView plaintext) {
  AeadSealed out;
  out.ciphertext.resize(plaintext.size());
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr);
  EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_IVLEN, 12, nullptr);
  EVP_EncryptInit_ex(ctx, nullptr, nullptr, key.data(), nonce.data());
  int len = 0;
  if (!aad.empty())
    EVP_EncryptUpdate(ctx, nullptr, &len, aad.data(),
                      static_cast<int>(aad.size()));
  if (!plaintext.empty())
    EVP_EncryptUpdate(ctx, out.ciphertext.data(), &len, plaintext.data(),
                      static_cast<int>(plaintext.size()));
  EVP_EncryptFinal_ex(ctx, out.ciphertext.data() + plaintext.size(), &len);
  EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, 16, out.tag.data());
  EVP_CIPHER_CTX_free(ctx);
  return out;
}

inline Result<Bytes> aes256gcm_open(const std::array<uint8_t, 32>& key,
                                    const std::array<uint8_t, 12>& nonce,
                                    ByteView aad, ByteView ciphertext,
                                    const std::array<uint8_t, 16>& tag) {
  Bytes plaintext(ciphertext.size());
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, nullptr, nullptr);
  EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_IVLEN, 12, nullptr);
  EVP_DecryptInit_ex(ctx, nullptr, nullptr, key.data(), nonce.data());
  int len = 0;
  if (!aad.empty())
    EVP_DecryptUpdate(ctx, nullptr, &len, aad.data(),
                      static_cast<int>(aad.size()));
  if (!ciphertext.empty())
    EVP_DecryptUpdate(ctx, plaintext.data(), &len, ciphertext.data(),
                      static_cast<int>(ciphertext.size()));
  std::array<uint8_t, 16> tag_copy = tag;
  EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16, tag_copy.data());
  int rc = EVP_DecryptFinal_ex(ctx, plaintext.data() + ciphertext.size(), &len);
  EVP_CIPHER_CTX_free(ctx);
  if (rc != 1) return Err::Corrupt;
  return plaintext;
}

inline Bytes aes256cbc_encrypt(const std::array<uint8_t, 32>& key,
                               const std::array<uint8_t, 16>& iv,
                               ByteView plaintext) {
  Bytes out(plaintext.size() + 16);
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  EVP_EncryptInit_ex(ctx, EVP_aes_256_cbc(), nullptr, key.data(), iv.data());
  int len1 = 0, len2 = 0;
  EVP_EncryptUpdate(ctx, out.data(), &len1, plaintext.data(),
                    static_cast<int>(plaintext.size()));
  EVP_EncryptFinal_ex(ctx, out.data() + len1, &len2);
  EVP_CIPHER_CTX_free(ctx);
  out.resize(static_cast<size_t>(len1 + len2));
  return out;
}

inline Result<Bytes> aes256cbc_decrypt(const std::array<uint8_t, 32>& key,
                                       const std::array<uint8_t, 16>& iv,
                                       ByteView ciphertext) {
  if (ciphertext.empty() || ciphertext.size() % 16 != 0) return Err::Corrupt;
  Bytes out(ciphertext.size());
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  EVP_DecryptInit_ex(ctx, EVP_aes_256_cbc(), nullptr, key.data(), iv.data());
  int len1 = 0, len2 = 0;
  EVP_DecryptUpdate(ctx, out.data(), &len1, ciphertext.data(),
                    static_cast<int>(ciphertext.size()));
  int rc = EVP_DecryptFinal_ex(ctx, out.data() + len1, &len2);
  EVP_CIPHER_CTX_free(ctx);
  if (rc != 1) return Err::Corrupt;
  out.resize(static_cast<size_t>(len1 + len2));
  return out;
}

// ---------------------------------------------------------------------------
// RSA
// ---------------------------------------------------------------------------

namespace detail {

struct EvpPkeyDeleter {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct BnDeleter {
  void operator()(BIGNUM* b) const { BN_free(b); }
};
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;

inline const std::vector<uint32_t>& small_primes() {
  static const std::vector<uint32_t> primes = [] {
    constexpr uint32_t limit = 1 << 14;
    std::vector<bool> composite(limit, false);
    std::vector<uint32_t> out;
    for (uint32_t i = 2; i < limit; ++i) {
      if (composite[i]) continue;
      if (i > 2) out.push_back(i);  // skip 2, candidates are odd
      for (uint32_t j = i * 2; j < limit; j += i) composite[j] = true;
    }
    return out;
  }();
  return primes;
}

// Deterministic prime search: candidates come from an HKDF stream, the +2k
// walk is filtered by an incremental small-prime sieve, survivors go to
// BN_check_prime. The found prime depends only on (prk, label, bits).
inline BnPtr derive_prime(const Digest& prk, const std::string& label,
                          int bits, uint32_t pub_exp) {
  BN_CTX* bnctx = BN_CTX_new();
  const auto& primes = small_primes();
  for (uint32_t attempt = 0;; ++attempt) {
    ByteWriter info;
    info.raw(to_bytes(label));
    info.u32(attempt);
    Bytes cand_bytes = hkdf_expand(prk, info.bytes(), bits / 8);
    cand_bytes[0] |= 0xc0;                    // top two bits: full-size product
    cand_bytes[bits / 8 - 1] |= 0x01;         // odd
    BnPtr cand(BN_bin2bn(cand_bytes.data(), bits / 8, nullptr));

    std::vector<uint32_t> residues(primes.size());
    for (size_t i = 0; i < primes.size(); ++i)
      residues[i] = static_cast<uint32_t>(BN_mod_word(cand.get(), primes[i]));
    uint64_t e_residue = BN_mod_word(cand.get(), pub_exp);

    constexpr uint64_t max_walk = 1 << 18;
    for (uint64_t k = 0; k < max_walk; k += 2) {
      bool sieved = false;
      for (size_t i = 0; i < primes.size(); ++i) {
        if ((residues[i] + k) % primes[i] == 0) {
          sieved = true;
          break;
        }
      }
      if (sieved) continue;
      // p ≡ 1 (mod e) would make e share a factor with p-1
      if ((e_residue + k) % pub_exp == 1) continue;
      BnPtr p(BN_dup(cand.get()));
      BN_add_word(p.get(), k);
      if (BN_num_bits(p.get()) != bits) break;  // walked past the size bound
      if (BN_check_prime(p.get(), bnctx, nullptr) == 1) {
        BN_CTX_free(bnctx);
        return p;
      }
    }
  }
}

}  // namespace detail

// Value-semantic wrapper over an EVP_PKEY RSA key. Copies share the
// underlying key, which is immutable after construction.
class RsaKey {
 public:
  RsaKey() = default;

  bool valid() const { return pkey_ != nullptr; }
  EVP_PKEY* get() const { return pkey_.get(); }
  size_t modulus_bytes() const {
    return static_cast<size_t>(EVP_PKEY_get_size(pkey_.get()));
  }
  bool has_private() const { return has_private_; }

  // SubjectPublicKeyInfo DER
  Bytes public_der() const {
    unsigned char* buf = nullptr;
    int len = i2d_PUBKEY(pkey_.get(), &buf);
    Bytes out(buf, buf + len);
    OPENSSL_free(buf);
    return out;
  }

  // PKCS#8 PrivateKeyInfo DER
  Bytes private_der() const {
    PKCS8_PRIV_KEY_INFO* p8 = EVP_PKEY2PKCS8(pkey_.get());
    unsigned char* buf = nullptr;
    int len = i2d_PKCS8_PRIV_KEY_INFO(p8, &buf);
    Bytes out(buf, buf + len);
    OPENSSL_free(buf);
    PKCS8_PRIV_KEY_INFO_free(p8);
    return out;
  }

  static Result<RsaKey> from_public_der(ByteView der) {
    const unsigned char* p = der.data();
    EVP_PKEY* pkey = d2i_PUBKEY(nullptr, &p, static_cast<long>(der.size()));
    if (!pkey) return Err::Corrupt;
    return RsaKey(pkey, false);
  }

  static Result<RsaKey> from_private_der(ByteView der) {
    const unsigned char* p = der.data();
    PKCS8_PRIV_KEY_INFO* p8 =
        d2i_PKCS8_PRIV_KEY_INFO(nullptr, &p, static_cast<long>(der.size()));
    if (!p8) return Err::Corrupt;
    EVP_PKEY* pkey = EVP_PKCS82PKEY(p8);
    PKCS8_PRIV_KEY_INFO_free(p8);
    if (!pkey) return Err::Corrupt;
    return RsaKey(pkey, true);
  }

  static RsaKey adopt(EVP_PKEY* pkey, bool has_private) {
    return RsaKey(pkey, has_private);
  }

 private:
  RsaKey(EVP_PKEY* pkey, bool has_private)
      : pkey_(pkey, detail::EvpPkeyDeleter{}), has_private_(has_private) {}

  std::shared_ptr<EVP_PKEY> pkey_;
  bool has_private_ = false;
};

// Derives an RSA keypair as a pure function of (ikm, bits). Same inputs,
// same key, on any machine.
inline RsaKey derive_rsa_key(ByteView ikm, int bits) {
  constexpr uint32_t kPubExp = 65537;
  Digest prk = hkdf_extract(to_bytes(std::string("svtpm/rsa-derive/v1")), ikm);
  detail::BnPtr p = detail::derive_prime(prk, "p", bits / 2, kPubExp);
  detail::BnPtr q = detail::derive_prime(prk, "q", bits / 2, kPubExp);
  if (BN_cmp(p.get(), q.get()) < 0) std::swap(p, q);

  BN_CTX* ctx = BN_CTX_new();
  detail::BnPtr n(BN_new()), e(BN_new()), d(BN_new()), p1(BN_new()),
      q1(BN_new()), phi(BN_new()), dp(BN_new()), dq(BN_new()), qinv(BN_new());
  BN_set_word(e.get(), kPubExp);
  BN_mul(n.get(), p.get(), q.get(), ctx);
  BN_sub(p1.get(), p.get(), BN_value_one());
  BN_sub(q1.get(), q.get(), BN_value_one());
  BN_mul(phi.get(), p1.get(), q1.get(), ctx);
  BN_mod_inverse(d.get(), e.get(), phi.get(), ctx);
  BN_mod(dp.get(), d.get(), p1.get(), ctx);
  BN_mod(dq.get(), d.get(), q1.get(), ctx);
  BN_mod_inverse(qinv.get(), q.get(), p.get(), ctx);

  OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_N, n.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_E, e.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_D, d.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR1, p.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_FACTOR2, q.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT1, dp.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_EXPONENT2, dq.get());
  OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_RSA_COEFFICIENT1, qinv.get());
  OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);

  EVP_PKEY_CTX* pctx = EVP_PKEY_CTX_new_from_name(nullptr, "RSA", nullptr);
  EVP_PKEY* pkey = nullptr;
  EVP_PKEY_fromdata_init(pctx);
  EVP_PKEY_fromdata(pctx, &pkey, EVP_PKEY_KEYPAIR, params);
  EVP_PKEY_CTX_free(pctx);
  OSSL_PARAM_free(params);
  OSSL_PARAM_BLD_free(bld);
  BN_CTX_free(ctx);
  if (!pkey) throw std::runtime_error("rsa key assembly failed");
  return RsaKey::adopt(pkey, true);
}

// Prime search is the dominant cost of key derivation and the result is a
// pure function of its inputs, so a process-wide memo is transparent.
inline RsaKey derive_rsa_key_cached(ByteView ikm, int bits) {
  static std::mutex mu;
  static std::map<std::pair<Bytes, int>, RsaKey> cache;
  std::pair<Bytes, int> key{to_bytes(ikm), bits};
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  RsaKey derived = derive_rsa_key(ikm, bits);
  std::lock_guard<std::mutex> lock(mu);
  return cache.emplace(std::move(key), derived).first->second;
}

// RSA-PSS over SHA-256 with a zero-length salt: deterministic, and still
// verifiable by any standard PSS verifier in auto-salt-length mode.
inline Bytes rsa_pss_sign(const RsaKey& key, ByteView msg) {
  EVP_MD_CTX* mctx = EVP_MD_CTX_new();
  EVP_PKEY_CTX* pctx = nullptr;
  EVP_DigestSignInit(mctx, &pctx, EVP_sha256(), nullptr, key.get());
  EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PSS_PADDING);
  EVP_PKEY_CTX_set_rsa_pss_saltlen(pctx, 0);
  EVP_PKEY_CTX_set_rsa_mgf1_md(pctx, EVP_sha256());
  size_t siglen = 0;
  EVP_DigestSign(mctx, nullptr, &siglen, msg.data(), msg.size());
  Bytes sig(siglen);
  EVP_DigestSign(mctx, sig.data(), &siglen, msg.data(), msg.size());
  sig.resize(siglen);
  EVP_MD_CTX_free(mctx);
  return sig;
}

inline bool rsa_pss_verify(const RsaKey& key, ByteView msg, ByteView sig) {
  EVP_MD_CTX* mctx = EVP_MD_CTX_new();
  EVP_PKEY_CTX* pctx = nullptr;
  EVP_DigestVerifyInit(mctx, &pctx, EVP_sha256(), nullptr, key.get());
  EVP_PKEY_CTX_set_rsa_padding(pctx, RSA_PKCS1_PSS_PADDING);
  EVP_PKEY_CTX_set_rsa_pss_saltlen(pctx, RSA_PSS_SALTLEN_AUTO);
  EVP_PKEY_CTX_set_rsa_mgf1_md(pctx, EVP_sha256());
  int rc = EVP_DigestVerify(mctx, sig.data(), sig.size(), msg.data(),
                            msg.size());
  EVP_MD_CTX_free(mctx);
  return rc == 1;
}

inline size_t rsa_oaep_max_payload(const RsaKey& key) {
  return key.modulus_bytes() - 2 * 32 - 2;
}

namespace detail {

inline Bytes mgf1_sha256(ByteView seed, size_t out_len) {
  Bytes out;
  uint32_t counter = 0;
  while (out.size() < out_len) {
    ByteWriter w;
    w.raw(seed);
    w.u32(counter++);
    Digest block = sha256(w.bytes());
    size_t need = std::min<size_t>(32, out_len - out.size());
    out.insert(out.end(), block.begin(), block.begin() + need);
  }
  return out;
}

}  // namespace detail

// OAEP (SHA-256, empty label) with caller-supplied seed, then a raw public
// RSA operation. The seed comes from the TPM's DRBG so encryption is
// reproducible under an injected seed; decryption goes through OpenSSL's
// own OAEP path, which independently checks the padding.
inline Result<Bytes> rsa_oaep_encrypt(const RsaKey& key, ByteView msg,
                                      const std::array<uint8_t, 32>& seed) {
  const size_t k = key.modulus_bytes();
  if (msg.size() > rsa_oaep_max_payload(key)) return Err::PayloadTooLarge;

  const size_t db_len = k - 32 - 1;
  Bytes db;
  db.reserve(db_len);
  Digest lhash = sha256({});
  db.insert(db.end(), lhash.begin(), lhash.end());
  db.resize(db_len - msg.size() - 1, 0);
  db.push_back(0x01);
  db.insert(db.end(), msg.begin(), msg.end());

  Bytes db_mask = detail::mgf1_sha256(view(seed), db_len);
  for (size_t i = 0; i < db_len; ++i) db[i] ^= db_mask[i];
  Bytes seed_mask = detail::mgf1_sha256(db, 32);
  Bytes em;
  em.reserve(k);
  em.push_back(0x00);
  for (size_t i = 0; i < 32; ++i) em.push_back(seed[i] ^ seed_mask[i]);
  em.insert(em.end(), db.begin(), db.end());

  EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new(key.get(), nullptr);
  EVP_PKEY_encrypt_init(ctx);
  EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_NO_PADDING);
  size_t out_len = k;
  Bytes out(k);
  int rc = EVP_PKEY_encrypt(ctx, out.data(), &out_len, em.data(), em.size());
  EVP_PKEY_CTX_free(ctx);
  if (rc != 1) return Err::Corrupt;
  out.resize(out_len);
  return out;
}

inline Result<Bytes> rsa_oaep_decrypt(const RsaKey& key, ByteView ct) {
  if (ct.size() != key.modulus_bytes()) return Err::Corrupt;
  EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new(key.get(), nullptr);
  EVP_PKEY_decrypt_init(ctx);
  EVP_PKEY_CTX_set_rsa_padding(ctx, RSA_PKCS1_OAEP_PADDING);
  EVP_PKEY_CTX_set_rsa_oaep_md(ctx, EVP_sha256());
  EVP_PKEY_CTX_set_rsa_mgf1_md(ctx, EVP_sha256());
  size_t out_len = key.modulus_bytes();
  Bytes out(out_len);
  int rc = EVP_PKEY_decrypt(ctx, out.data(), &out_len, ct.data(), ct.size());
  EVP_PKEY_CTX_free(ctx);
  if (rc != 1) return Err::Corrupt;
  out.resize(out_len);
  return out;
}

}  // namespace svtpm
