#include "bridgeaudit/model.hpp"

#include <algorithm>
#include <cctype>

namespace bridgeaudit {

std::string TokenId::key() const { return chain.name() + ":" + address; }

std::optional<TokenId> parse_token_key(std::string_view key) {
  const auto sep = key.find(':');
  if (sep == std::string_view::npos || sep == 0 || sep + 1 == key.size()) return std::nullopt;
  TokenId t;
  t.chain = ChainId(std::string(key.substr(0, sep)));
  t.address = to_lower(key.substr(sep + 1));
  return t;
}

std::string TxRef::to_string() const {
  return chain.name() + ":" + tx_hash + ":" + std::to_string(log_index);
}

std::string to_string(const PairKey& key) {
  struct Visitor {
    std::string operator()(const PairById& k) const {
      return "id:" + k.bridge_id + ":" + std::to_string(k.deposit_id);
    }
    std::string operator()(const PairByDepositHash& k) const { return "hash:" + k.tx_hash; }
    std::string operator()(const PairExternal& k) const { return "ext:" + k.key; }
  };
  return std::visit(Visitor{}, key);
}

bool is_zero_address(std::string_view address) {
  if (address.size() < 3 || address[0] != '0' || (address[1] != 'x' && address[1] != 'X')) {
    return false;
  }
  return std::all_of(address.begin() + 2, address.end(), [](char c) { return c == '0'; });
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace bridgeaudit
