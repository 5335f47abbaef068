#include "mtpgo/memory_tree.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stack>

namespace mtpgo {

struct MemoryTree::Node {
  NodeKey key = 0;
  Pose4 rel;
  int height = 1;
  Node* parent = nullptr;
  std::unique_ptr<Node> left;
  std::unique_ptr<Node> right;
};

// Out-of-line so unique_ptr<Node> sees the complete type.
MemoryTree::MemoryTree() = default;
MemoryTree::~MemoryTree() = default;
MemoryTree::MemoryTree(MemoryTree&&) noexcept = default;
MemoryTree& MemoryTree::operator=(MemoryTree&&) noexcept = default;

int MemoryTree::node_height(const Node* n) { return n ? n->height : 0; }

void MemoryTree::update_height(Node* n) {
  n->height = 1 + std::max(node_height(n->left.get()), node_height(n->right.get()));
}

int MemoryTree::balance_factor(const Node* n) {
  return node_height(n->left.get()) - node_height(n->right.get());
}

MemoryTree::Node* MemoryTree::find(NodeKey key) const {
  auto it = index_.find(key);
  return it == index_.end() ? nullptr : it->second;
}

MemoryTree::Node* MemoryTree::require(NodeKey key) const {
  Node* n = find(key);
  if (!n) {
    throw std::invalid_argument("MemoryTree: key " + std::to_string(key) + " not present");
  }
  return n;
}

std::unique_ptr<MemoryTree::Node>& MemoryTree::slot_of(Node* n) {
  if (!n->parent) {
    return root_;
  }
  return n->parent->left.get() == n ? n->parent->left : n->parent->right;
}

Pose4 MemoryTree::global_of(const Node* n, int* compose_steps) const {
  Pose4 g = n->rel;
  int steps = 0;
  for (const Node* p = n->parent; p; p = p->parent) {
    g = compose(p->rel, g);
    ++steps;
  }
  if (compose_steps) {
    *compose_steps = steps;
  }
  return g;
}

// Right rotation at y (left child x rises). The transferred subtree is x's
// right child. rel updates keep every global pose unchanged:
//   rel'(x) = rel(y) o rel(x)     x now hangs off y's old parent
//   rel'(y) = rel(x)^-1           y now hangs off x
//   rel'(B) = rel(x) o rel(B)     B moves from x to y
MemoryTree::Node* MemoryTree::rotate_right(Node* y) {
  Node* x = y->left.get();
  const Pose4 rel_y = y->rel;
  const Pose4 rel_x = x->rel;
  if (Node* b = x->right.get()) {
    b->rel = compose(rel_x, b->rel);
  }
  x->rel = compose(rel_y, rel_x);
  y->rel = inverse(rel_x);

  auto& yslot = slot_of(y);
  std::unique_ptr<Node> ux = std::move(y->left);
  y->left = std::move(x->right);
  if (y->left) {
    y->left->parent = y;
  }
  x->parent = y->parent;
  std::unique_ptr<Node> uy = std::move(yslot);
  y->parent = x;
  x->right = std::move(uy);
  yslot = std::move(ux);

  update_height(y);
  update_height(x);
  return x;
}

MemoryTree::Node* MemoryTree::rotate_left(Node* y) {
  Node* x = y->right.get();
  const Pose4 rel_y = y->rel;
  const Pose4 rel_x = x->rel;
  if (Node* b = x->left.get()) {
    b->rel = compose(rel_x, b->rel);
  }
  x->rel = compose(rel_y, rel_x);
  y->rel = inverse(rel_x);

  auto& yslot = slot_of(y);
  std::unique_ptr<Node> ux = std::move(y->right);
  y->right = std::move(x->left);
  if (y->right) {
    y->right->parent = y;
  }
  x->parent = y->parent;
  std::unique_ptr<Node> uy = std::move(yslot);
  y->parent = x;
  x->left = std::move(uy);
  yslot = std::move(ux);

  update_height(y);
  update_height(x);
  return x;
}

MemoryTree::Node* MemoryTree::rebalance(Node* n) {
  const int bf = balance_factor(n);
  if (bf > 1) {
    if (balance_factor(n->left.get()) < 0) {
      rotate_left(n->left.get());
    }
    return rotate_right(n);
  }
  if (bf < -1) {
    if (balance_factor(n->right.get()) > 0) {
      rotate_right(n->right.get());
    }
    return rotate_left(n);
  }
  return n;
}

void MemoryTree::retrace(Node* n) {
  Node* cur = n;
  while (cur) {
    update_height(cur);
    cur = rebalance(cur);
    cur = cur->parent;
  }
}

void MemoryTree::insert(NodeKey key, const Pose4& global) {
  if (index_.count(key)) {
    throw std::invalid_argument("MemoryTree: duplicate key " + std::to_string(key));
  }
  ++version_;
  if (!root_) {
    root_ = std::make_unique<Node>();
    root_->key = key;
    root_->rel = global;
    index_.emplace(key, root_.get());
    return;
  }
  Node* cur = root_.get();
  Pose4 g_cur = cur->rel;
  for (;;) {
    std::unique_ptr<Node>& next = key < cur->key ? cur->left : cur->right;
    if (!next) {
      next = std::make_unique<Node>();
      next->key = key;
      next->parent = cur;
      next->rel = relative(g_cur, global);
      index_.emplace(key, next.get());
      retrace(cur);
      return;
    }
    cur = next.get();
    g_cur = compose(g_cur, cur->rel);
  }
}

void MemoryTree::remove(NodeKey key) {
  Node* z = require(key);
  ++version_;

  if (z->left && z->right) {
    // In-order successor: minimum of the right subtree. z takes over s's key
    // and frame; s's right child is lifted into s's place. All rel updates
    // use globals captured before any mutation.
    Node* s = z->right.get();
    while (s->left) {
      s = s->left.get();
    }
    Node* p_s = s->parent;
    Node* lift = s->right.get();

    const Pose4 g_s = global_of(s);
    const Pose4 g_zl = global_of(z->left.get());
    const Pose4 g_zr = p_s == z ? Pose4() : global_of(z->right.get());
    const Pose4 g_lift = lift ? global_of(lift) : Pose4();
    const Pose4 g_ps = p_s == z ? Pose4() : global_of(p_s);
    const bool z_is_root = z->parent == nullptr;
    const Pose4 g_zp = z_is_root ? Pose4() : global_of(z->parent);

    // Splice s out (s has no left child).
    std::unique_ptr<Node>& sslot = slot_of(s);
    std::unique_ptr<Node> us = std::move(sslot);
    sslot = std::move(s->right);
    if (sslot) {
      sslot->parent = p_s;
    }

    index_.erase(z->key);
    z->key = us->key;
    index_[z->key] = z;
    z->rel = z_is_root ? g_s : relative(g_zp, g_s);
    z->left->rel = relative(g_s, g_zl);
    if (p_s == z) {
      if (lift) {
        lift->rel = relative(g_s, g_lift);
      }
    } else {
      z->right->rel = relative(g_s, g_zr);
      if (lift) {
        lift->rel = relative(g_ps, g_lift);
      }
    }
    retrace(p_s == z ? z : p_s);
    return;
  }

  // At most one child: lift it into z's slot.
  Node* p = z->parent;
  std::unique_ptr<Node>& child = z->left ? z->left : z->right;
  const bool had_child = child != nullptr;
  const Pose4 g_c = had_child ? global_of(child.get()) : Pose4();
  const Pose4 g_p = p ? global_of(p) : Pose4();

  std::unique_ptr<Node>& zslot = slot_of(z);
  std::unique_ptr<Node> uz = std::move(zslot);
  zslot = std::move(child);
  if (zslot) {
    zslot->parent = p;
    zslot->rel = p ? relative(g_p, g_c) : g_c;
  }
  index_.erase(uz->key);
  retrace(p);
}

Pose4 MemoryTree::global_pose(NodeKey key, int* compose_steps) const {
  return global_of(require(key), compose_steps);
}

MemoryTree::Node* MemoryTree::lca_node(NodeKey a, NodeKey b) const {
  require(a);
  require(b);
  const NodeKey lo = std::min(a, b);
  const NodeKey hi = std::max(a, b);
  Node* cur = root_.get();
  while (cur) {
    if (cur->key < lo) {
      cur = cur->right.get();
    } else if (cur->key > hi) {
      cur = cur->left.get();
    } else {
      return cur;
    }
  }
  throw std::logic_error("MemoryTree: lca descent fell off the tree");
}

NodeKey MemoryTree::lca(NodeKey a, NodeKey b) const { return lca_node(a, b)->key; }

std::vector<NodeKey> MemoryTree::path(NodeKey a, NodeKey b) const {
  const Node* l = lca_node(a, b);
  std::vector<NodeKey> out;
  const Node* cur = require(a);
  while (cur != l) {
    out.push_back(cur->key);
    cur = cur->parent;
  }
  out.push_back(l->key);
  std::vector<NodeKey> tail;
  cur = require(b);
  while (cur != l) {
    tail.push_back(cur->key);
    cur = cur->parent;
  }
  out.insert(out.end(), tail.rbegin(), tail.rend());
  return out;
}

PathSnapshot MemoryTree::snapshot(const std::vector<NodeKey>& keys) const {
  PathSnapshot snap;
  snap.structure_version = version_;
  snap.states.reserve(keys.size());
  for (NodeKey k : keys) {
    snap.states.emplace_back(k, require(k)->rel);
  }
  return snap;
}

PathSnapshot MemoryTree::snapshot_path(NodeKey a, NodeKey b) const { return snapshot(path(a, b)); }

void MemoryTree::restore(const PathSnapshot& snap) {
  if (snap.structure_version != version_) {
    throw std::runtime_error("MemoryTree: snapshot is stale, topology changed since capture");
  }
  for (const auto& [key, rel] : snap.states) {
    require(key)->rel = rel;
  }
}

const Pose4& MemoryTree::rel_pose(NodeKey key) const { return require(key)->rel; }

void MemoryTree::set_rel_pose(NodeKey key, const Pose4& rel) { require(key)->rel = rel; }

bool MemoryTree::contains(NodeKey key) const { return find(key) != nullptr; }

std::size_t MemoryTree::size() const { return index_.size(); }

int MemoryTree::height() const { return node_height(root_.get()); }

NodeKey MemoryTree::root_key() const {
  if (!root_) {
    throw std::logic_error("MemoryTree: empty tree has no root");
  }
  return root_->key;
}

std::pair<NodeKey, NodeKey> MemoryTree::subtree_interval(NodeKey key) const {
  const Node* n = require(key);
  const Node* lo = n;
  while (lo->left) {
    lo = lo->left.get();
  }
  const Node* hi = n;
  while (hi->right) {
    hi = hi->right.get();
  }
  return {lo->key, hi->key};
}

NodeView MemoryTree::view(NodeKey key) const {
  const Node* n = require(key);
  NodeView v;
  v.key = n->key;
  v.rel = n->rel;
  v.height = n->height;
  if (n->parent) {
    v.parent = n->parent->key;
  }
  if (n->left) {
    v.left = n->left->key;
  }
  if (n->right) {
    v.right = n->right->key;
  }
  return v;
}

std::vector<NodeKey> MemoryTree::keys_inorder() const {
  std::vector<NodeKey> out;
  out.reserve(index_.size());
  std::stack<const Node*> st;
  const Node* cur = root_.get();
  while (cur || !st.empty()) {
    while (cur) {
      st.push(cur);
      cur = cur->left.get();
    }
    cur = st.top();
    st.pop();
    out.push_back(cur->key);
    cur = cur->right.get();
  }
  return out;
}

std::string MemoryTree::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  // Iterative pre-order; recursion depth is log-bounded but stack depth is
  // not worth relying on for million-node trees elsewhere, keep the idiom.
  std::stack<const Node*> st;
  if (root_) {
    st.push(root_.get());
  }
  while (!st.empty()) {
    const Node* n = st.top();
    st.pop();
    os << n->key << ' ' << n->rel.yaw << ' ' << n->rel.trans.x() << ' ' << n->rel.trans.y() << ' '
       << n->rel.trans.z() << ' ' << (n->left ? 1 : 0) << (n->right ? 1 : 0) << '\n';
    if (n->right) {
      st.push(n->right.get());
    }
    if (n->left) {
      st.push(n->left.get());
    }
  }
  return os.str();
}

void MemoryTree::validate() const {
  struct Frame {
    const Node* n;
    bool has_lo = false, has_hi = false;
    NodeKey lo = 0, hi = 0;
  };
  std::size_t visited = 0;
  std::stack<Frame> st;
  if (root_) {
    if (root_->parent) {
      throw std::logic_error("validate: root has a parent");
    }
    st.push({root_.get()});
  }
  while (!st.empty()) {
    Frame f = st.top();
    st.pop();
    const Node* n = f.n;
    ++visited;
    if ((f.has_lo && n->key <= f.lo) || (f.has_hi && n->key >= f.hi)) {
      throw std::logic_error("validate: BST order violated at key " + std::to_string(n->key));
    }
    const int hl = node_height(n->left.get());
    const int hr = node_height(n->right.get());
    if (n->height != 1 + std::max(hl, hr)) {
      throw std::logic_error("validate: stale height at key " + std::to_string(n->key));
    }
    if (hl - hr > 1 || hr - hl > 1) {
      throw std::logic_error("validate: AVL balance violated at key " + std::to_string(n->key));
    }
    auto it = index_.find(n->key);
    if (it == index_.end() || it->second != n) {
      throw std::logic_error("validate: index mismatch at key " + std::to_string(n->key));
    }
    if (n->left) {
      if (n->left->parent != n) {
        throw std::logic_error("validate: bad parent link at key " + std::to_string(n->left->key));
      }
      Frame c = f;
      c.n = n->left.get();
      c.has_hi = true;
      c.hi = n->key;
      st.push(c);
    }
    if (n->right) {
      if (n->right->parent != n) {
        throw std::logic_error("validate: bad parent link at key " + std::to_string(n->right->key));
      }
      Frame c = f;
      c.n = n->right.get();
      c.has_lo = true;
      c.lo = n->key;
      st.push(c);
    }
  }
  if (visited != index_.size()) {
    throw std::logic_error("validate: node count does not match index size");
  }
  if (root_) {
    const double bound = 1.4405 * std::log2(static_cast<double>(index_.size()) + 2.0) - 0.3277;
    if (static_cast<double>(root_->height) > bound) {
      throw std::logic_error("validate: AVL height bound exceeded");
    }
  }
}

}  // namespace mtpgo
