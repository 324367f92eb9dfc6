#include <sys/mman.h>
#include <caml/mlvalues.h>
#include <caml/memory.h>
#include <caml/alloc.h>
#include <caml/fail.h>

struct mmap_interface {
    void *addr;
    int len;
};

CAMLprim value stub_map_foreign_range(value xch_val, value dom,
                                      value size, value mfn)
{
    CAMLparam4(xch_val, dom, size, mfn);
    CAMLlocal1(result);
    struct mmap_interface *intf;
    uint32_t c_dom = Int_val(dom);
    unsigned long c_mfn = Nativeint_val(mfn);
    xc_interface *xch = *(xc_interface **)Data_custom_val(xch_val);

    result = caml_alloc(Wsize_bsize(sizeof(struct mmap_interface)),
                        Abstract_tag);

    intf = (struct mmap_interface *) result;
    intf->len = Int_val(size);

    caml_enter_blocking_section();
    intf->addr = xc_map_foreign_range(xch, c_dom,
                                      intf->len, PROT_READ|PROT_WRITE,
                                      c_mfn);
    caml_leave_blocking_section();
    CAMLreturn(result);
}
